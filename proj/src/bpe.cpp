#include "msnmt/bpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "msnmt/errors.hpp"
#include "msnmt/kvfile.hpp"
#include "msnmt/tokens.hpp"

namespace msnmt {

namespace {

constexpr std::string_view kJoiner = "@@";

bool ends_with_joiner(std::string_view s) { return s.size() > kJoiner.size() && s.ends_with(kJoiner); }

}  // namespace

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && !(s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

SubwordModel SubwordModel::train(std::span<const std::string> sentences, int n_merges) {
  if (n_merges < 0) throw ContractError("n_merges must be non-negative");
  if (sentences.empty()) throw ContractError("cannot train a subword model on no sentences");

  std::map<std::string, long, std::less<>> word_freq;
  for (const auto& s : sentences)
    for (auto w : split_whitespace(s))
      if (!is_null_text(w)) ++word_freq[std::string(w)];

  std::vector<std::vector<std::string>> words;
  std::vector<long> freq;
  std::set<std::string> symbols;
  for (const auto& [w, f] : word_freq) {
    words.push_back(utf8_chars(w));
    freq.push_back(f);
    symbols.insert(words.back().begin(), words.back().end());
  }

  SubwordModel model;
  for (int m = 0; m < n_merges; ++m) {
    std::map<Merge, long> counts;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i) counts[{words[w][i], words[w][i + 1]}] += freq[w];
    if (counts.empty()) break;
    // std::map iterates pairs in ascending order, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    const Merge merge = best->first;
    model.merges_.push_back(merge);
    const std::string joined = merge.first + merge.second;
    symbols.insert(joined);
    for (auto& word : words) {
      std::vector<std::string> next;
      next.reserve(word.size());
      for (std::size_t i = 0; i < word.size(); ++i) {
        if (i + 1 < word.size() && word[i] == merge.first && word[i + 1] == merge.second) {
          next.push_back(joined);
          ++i;
        } else {
          next.push_back(word[i]);
        }
      }
      word = std::move(next);
    }
  }

  model.tokens_ = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
                   std::string(kUnkToken), std::string(kNullToken)};
  std::set<std::string> pieces;
  for (const auto& s : symbols) {
    pieces.insert(s);
    pieces.insert(s + std::string(kJoiner));
  }
  model.tokens_.insert(model.tokens_.end(), pieces.begin(), pieces.end());
  model.build_index();
  return model;
}

void SubwordModel::build_index() {
  rank_.clear();
  for (std::size_t i = 0; i < merges_.size(); ++i) rank_.emplace(merges_[i], i);
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

const std::string& SubwordModel::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

int SubwordModel::id(std::string_view token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::vector<std::string> SubwordModel::apply_merges(std::string_view word) const {
  auto symbols = utf8_chars(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end()) best_rank = std::min(best_rank, it->second);
    }
    if (best_rank == merges_.size()) break;
    const auto& [a, b] = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
        next.push_back(a + b);
        ++i;
      } else {
        next.push_back(symbols[i]);
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::vector<std::string> SubwordModel::segment_pieces(std::string_view text) const {
  std::vector<std::string> pieces;
  for (auto word : split_whitespace(text)) {
    if (is_null_text(word)) {
      pieces.emplace_back(kNullToken);
      continue;
    }
    auto symbols = apply_merges(word);
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += kJoiner;
    pieces.insert(pieces.end(), symbols.begin(), symbols.end());
  }
  return pieces;
}

std::vector<int> SubwordModel::segment(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& p : segment_pieces(text)) ids.push_back(id(p));
  return ids;
}

std::string SubwordModel::desegment(std::span<const int> ids) const {
  std::string out;
  bool open_word = false;
  for (int id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    const std::string& piece = token(id);
    if (!open_word && !out.empty()) out += ' ';
    if (ends_with_joiner(piece)) {
      out.append(piece, 0, piece.size() - kJoiner.size());
      open_word = true;
    } else {
      out += piece;
      open_word = false;
    }
  }
  return out;
}

std::string SubwordModel::serialize() const {
  std::string out;
  for (const auto& [a, b] : merges_) out += a + " " + b + "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) out += tokens_[i] + "\t" + std::to_string(i) + "\n";
  return out;
}

SubwordModel SubwordModel::parse(const std::string& text, const std::string& origin) {
  SubwordModel model;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      if (!model.tokens_.empty()) throw ParseError(where + ": merge after vocabulary section");
      const auto sp = line.find(' ');
      if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() || line.find(' ', sp + 1) != std::string::npos)
        throw ParseError(where + ": expected merge pair 'a b'");
      model.merges_.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    } else {
      const auto token = line.substr(0, tab);
      const auto id = std::stoul(line.substr(tab + 1));
      if (id != model.tokens_.size()) throw ParseError(where + ": vocabulary ids must be consecutive");
      model.tokens_.push_back(token);
    }
  }
  if (model.tokens_.size() < static_cast<std::size_t>(kNumReserved) || model.tokens_[kPadId] != kPadToken ||
      model.tokens_[kBosId] != kBosToken || model.tokens_[kEosId] != kEosToken ||
      model.tokens_[kUnkId] != kUnkToken || model.tokens_[kNullId] != kNullToken)
    throw ParseError(origin + ": reserved tokens missing or out of order");
  model.build_index();
  return model;
}

void SubwordModel::save(const std::string& path) const { write_text_file(path, serialize()); }

SubwordModel SubwordModel::load(const std::string& path) { return parse(read_text_file(path), path); }

}  // namespace msnmt
