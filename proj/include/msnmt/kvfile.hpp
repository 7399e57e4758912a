#pragma once

#include <map>
#include <string>

#include "msnmt/errors.hpp"

namespace msnmt {

using KeyValues = std::map<std::string, std::string>;

// "key=value" per line; blank lines and lines starting with '#' are skipped.
// Duplicate keys and lines without '=' are parse errors naming the line.
KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues read_key_values(const std::string& path);
// Sorted by key, one "key=value" per line.
std::string format_key_values(const KeyValues& kv);
void write_key_values(const std::string& path, const KeyValues& kv);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace msnmt
