#include "msnmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msnmt/rng.hpp"
#include "msnmt/tokens.hpp"

namespace msnmt {

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Pseudo: return "pseudo";
    case Provenance::NullFilled: return "null";
  }
  return "unknown";
}

MultiCorpus::MultiCorpus(std::vector<std::string> languages) : languages_(std::move(languages)) {
  if (languages_.empty()) throw ValidationError("corpus needs at least one language");
  for (std::size_t i = 0; i < languages_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (languages_[i] == languages_[j]) throw ValidationError("duplicate language " + languages_[i]);
}

MultiCorpus::MultiCorpus(std::vector<std::string> languages, std::vector<Row> rows)
    : MultiCorpus(std::move(languages)) {
  rows_.reserve(rows.size());
  for (auto& r : rows) add_row(std::move(r));
}

std::size_t MultiCorpus::index_of(std::string_view lang) const {
  for (std::size_t i = 0; i < languages_.size(); ++i)
    if (languages_[i] == lang) return i;
  throw ContractError("language '" + std::string(lang) + "' not in corpus");
}

bool MultiCorpus::has_language(std::string_view lang) const {
  return std::find(languages_.begin(), languages_.end(), lang) != languages_.end();
}

void MultiCorpus::add_row(Row row) {
  if (row.size() != languages_.size())
    throw ValidationError("row has " + std::to_string(row.size()) + " cells, corpus has " +
                          std::to_string(languages_.size()) + " languages");
  if (!row[0].present())
    throw ValidationError("pivot language " + languages_[0] + " is missing in row " +
                          std::to_string(rows_.size()));
  for (const auto& c : row)
    if (!c.present() && c.provenance != Provenance::Original)
      throw ValidationError("missing cell cannot carry provenance " +
                            std::string(provenance_name(c.provenance)));
  rows_.push_back(std::move(row));
}

MultiCorpus MultiCorpus::with_rows(std::vector<Row> rows) const { return MultiCorpus(languages_, std::move(rows)); }

MultiCorpus MultiCorpus::subset(std::span<const std::size_t> indices) const {
  MultiCorpus out(languages_);
  out.rows_.reserve(indices.size());
  for (auto i : indices) out.rows_.push_back(rows_.at(i));
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cells.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cells;
}

}  // namespace

MultiCorpus parse_corpus(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ":1: missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_tabs(line);
  for (const auto& h : header)
    if (h.empty()) throw ParseError(origin + ":1: empty language code in header");
  MultiCorpus corpus(header);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cells = split_tabs(line);
    if (cells.size() != header.size())
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    Row row;
    row.reserve(cells.size());
    for (auto& c : cells) row.push_back(c.empty() ? Cell::missing() : Cell::original(std::move(c)));
    if (!row[0].present())
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": pivot language " + header[0] +
                            " is missing");
    corpus.add_row(std::move(row));
  }
  return corpus;
}

MultiCorpus load_corpus(const std::string& path) { return parse_corpus(read_text_file(path), path); }

std::string format_corpus(const MultiCorpus& corpus) {
  std::string out;
  const auto& langs = corpus.languages();
  for (std::size_t i = 0; i < langs.size(); ++i) out += (i ? "\t" : "") + langs[i];
  out += '\n';
  for (const auto& row : corpus.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += '\t';
      if (row[i].present()) {
        if (row[i].text->find_first_of("\t\n") != std::string::npos)
          throw ValidationError("corpus text may not contain tabs or newlines");
        out += *row[i].text;
      }
    }
    out += '\n';
  }
  return out;
}

void save_corpus(const std::string& path, const MultiCorpus& corpus) {
  write_text_file(path, format_corpus(corpus));
}

CorpusStats corpus_stats(const MultiCorpus& corpus) {
  CorpusStats stats;
  stats.rows = corpus.size();
  for (std::size_t l = 0; l < corpus.languages().size(); ++l) {
    LanguageStats s;
    s.language = corpus.languages()[l];
    for (const auto& row : corpus.rows()) (row[l].present() ? s.present : s.missing)++;
    const auto total = s.present + s.missing;
    s.missing_fraction_of_rows = total ? static_cast<double>(s.missing) / static_cast<double>(total) : 0.0;
    s.missing_per_present = s.present ? static_cast<double>(s.missing) / static_cast<double>(s.present) : 0.0;
    stats.languages.push_back(s);
  }
  return stats;
}

MultiCorpus fill_null(const MultiCorpus& corpus, std::string_view language) {
  const auto l = corpus.index_of(language);
  auto rows = corpus.rows();
  for (auto& row : rows)
    if (!row[l].present()) row[l] = Cell{std::string(kNullToken), Provenance::NullFilled};
  return corpus.with_rows(std::move(rows));
}

bool row_complete(const Row& row) {
  return std::all_of(row.begin(), row.end(),
                     [](const Cell& c) { return c.present() && c.provenance != Provenance::NullFilled; });
}

MultiCorpus filter_complete(const MultiCorpus& corpus, std::span<const std::string> languages) {
  std::vector<std::size_t> idx;
  for (const auto& l : languages) idx.push_back(corpus.index_of(l));
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& row = corpus.row(r);
    const bool ok = std::all_of(idx.begin(), idx.end(), [&](std::size_t l) {
      return row[l].present() && row[l].provenance != Provenance::NullFilled;
    });
    if (ok) keep.push_back(r);
  }
  return corpus.subset(keep);
}

CorpusSplit split(const MultiCorpus& corpus, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.size() != 3) throw ContractError("split needs three fractions (train, valid, test)");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ContractError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split fractions must sum to 1");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n))));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  const std::span<const std::size_t> all(order);
  CorpusSplit out;
  out.train = corpus.subset(all.subspan(0, n_train));
  out.valid = corpus.subset(all.subspan(n_train, n_valid));
  std::vector<std::size_t> test;
  for (auto i : all.subspan(n_train + n_valid))
    if (row_complete(corpus.row(i))) test.push_back(i);
  out.test = corpus.subset(test);
  return out;
}

}  // namespace msnmt
