#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "msnmt/errors.hpp"
#include "msnmt/kvfile.hpp"

namespace msnmt {

enum class Provenance { Original, Pseudo, NullFilled };

std::string_view provenance_name(Provenance p);

struct Cell {
  std::optional<std::string> text;  // nullopt = Missing
  Provenance provenance = Provenance::Original;

  bool present() const { return text.has_value(); }
  static Cell missing() { return {}; }
  static Cell original(std::string s) { return {std::move(s), Provenance::Original}; }
  static Cell pseudo(std::string s) { return {std::move(s), Provenance::Pseudo}; }

  friend bool operator==(const Cell&, const Cell&) = default;
};

using Row = std::vector<Cell>;

// Aligned rows over K languages. Language 0 is the pivot and is present in
// every row. Values are immutable in practice: transformations return copies.
class MultiCorpus {
 public:
  MultiCorpus() = default;
  explicit MultiCorpus(std::vector<std::string> languages);
  MultiCorpus(std::vector<std::string> languages, std::vector<Row> rows);

  const std::vector<std::string>& languages() const { return languages_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const Row& row(std::size_t i) const { return rows_.at(i); }
  const Cell& cell(std::size_t row, std::size_t lang) const { return rows_.at(row).at(lang); }

  // Index of a language code; throws ContractError when absent.
  std::size_t index_of(std::string_view lang) const;
  bool has_language(std::string_view lang) const;

  // Throws ValidationError if the row shape or the pivot invariant fails.
  void add_row(Row row);
  MultiCorpus with_rows(std::vector<Row> rows) const;
  // Rows selected by index, in the given order.
  MultiCorpus subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const MultiCorpus&, const MultiCorpus&) = default;

 private:
  std::vector<std::string> languages_;
  std::vector<Row> rows_;
};

// Header line of tab-separated language codes, then one row per line with an
// empty cell meaning Missing. Throws ParseError (with line number) on ragged
// rows and ValidationError when the pivot cell is missing.
MultiCorpus parse_corpus(const std::string& text, const std::string& origin = "<corpus>");
MultiCorpus load_corpus(const std::string& path);
std::string format_corpus(const MultiCorpus& corpus);
void save_corpus(const std::string& path, const MultiCorpus& corpus);

struct LanguageStats {
  std::string language;
  std::size_t present = 0;
  std::size_t missing = 0;
  // missing / (present + missing)
  double missing_fraction_of_rows = 0.0;
  // missing / present, the convention of the corpus-size tables
  double missing_per_present = 0.0;
};

struct CorpusStats {
  std::size_t rows = 0;
  std::vector<LanguageStats> languages;
};

CorpusStats corpus_stats(const MultiCorpus& corpus);

// Missing cells of `language` become the null token (provenance NullFilled).
MultiCorpus fill_null(const MultiCorpus& corpus, std::string_view language);

// Rows where every listed language is present as Original or Pseudo text.
MultiCorpus filter_complete(const MultiCorpus& corpus, std::span<const std::string> languages);

// True when every language of the row holds Original or Pseudo text.
bool row_complete(const Row& row);

struct CorpusSplit {
  MultiCorpus train, valid, test;
};

// Seeded shuffle, then partition by fractions (train, valid, test). The test
// part keeps complete rows only.
CorpusSplit split(const MultiCorpus& corpus, std::span<const double> fractions, std::uint64_t seed);

}  // namespace msnmt
