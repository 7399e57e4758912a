#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msnmt {

// Byte-pair-encoding subword model over UTF-8 code points. Merges never cross
// whitespace; every piece of a word except the last carries the "@@" suffix.
// Reserved tokens occupy ids 0-4 (pad, bos, eos, unk, null).
class SubwordModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  // Greedy most-frequent-pair merging, ties broken by the smaller pair.
  static SubwordModel train(std::span<const std::string> sentences, int n_merges);

  std::vector<int> segment(std::string_view text) const;
  std::vector<std::string> segment_pieces(std::string_view text) const;
  std::string desegment(std::span<const int> ids) const;

  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t vocab_size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  // kUnkId for unknown tokens.
  int id(std::string_view token) const;

  // Merge lines "a b" in application order, then vocabulary lines "token\tid".
  std::string serialize() const;
  static SubwordModel parse(const std::string& text, const std::string& origin = "<subword>");
  void save(const std::string& path) const;
  static SubwordModel load(const std::string& path);

  friend bool operator==(const SubwordModel& a, const SubwordModel& b) {
    return a.merges_ == b.merges_ && a.tokens_ == b.tokens_;
  }

 private:
  void build_index();
  std::vector<std::string> apply_merges(std::string_view word) const;

  std::vector<Merge> merges_;
  std::map<Merge, std::size_t> rank_;
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

// Code points of a UTF-8 string (invalid bytes are passed through singly).
std::vector<std::string> utf8_chars(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace msnmt
