#include <doctest.h>

#include <set>

#include "msnmt/corpus.hpp"
#include "msnmt/errors.hpp"
#include "msnmt/rng.hpp"
#include "msnmt/tokens.hpp"

using namespace msnmt;

namespace {

const char* kSample =
    "en\thr\tsr\n"
    "a cat\tmačka\tмачка\n"
    "a dog\t\tпас\n"
    "the end\tkraj\t\n";

}  // namespace

TEST_CASE("parse: empty cells are missing, header gives the languages") {
  const auto c = parse_corpus(kSample);
  CHECK(c.languages() == std::vector<std::string>{"en", "hr", "sr"});
  CHECK(c.size() == 3);
  CHECK_FALSE(c.cell(1, 1).present());
  CHECK(*c.cell(0, 2).text == "мачка");
  CHECK(c.cell(0, 1).provenance == Provenance::Original);
}

TEST_CASE("format and parse round trip") {
  const auto c = parse_corpus(kSample);
  CHECK(format_corpus(c) == kSample);
  CHECK(parse_corpus(format_corpus(c)) == c);
}

TEST_CASE("ragged row reports its line") {
  try {
    parse_corpus("en\thr\na\tb\nc\n", "f.tsv");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("f.tsv:3") != std::string::npos);
  }
}

TEST_CASE("missing pivot cell is a validation error") {
  CHECK_THROWS_AS(parse_corpus("en\thr\n\tb\n"), ValidationError);
  MultiCorpus c({"en", "hr"});
  CHECK_THROWS_AS(c.add_row({Cell::missing(), Cell::original("x")}), ValidationError);
  CHECK_THROWS_AS(c.add_row({Cell::original("x")}), ValidationError);
}

TEST_CASE("unknown language lookup is a contract error") {
  const auto c = parse_corpus(kSample);
  CHECK(c.index_of("sr") == 2);
  CHECK_THROWS_AS(c.index_of("de"), ContractError);
}

TEST_CASE("stats: both missing-fraction conventions") {
  const auto s = corpus_stats(parse_corpus(kSample));
  CHECK(s.rows == 3);
  const auto& hr = s.languages[1];
  CHECK(hr.present == 2);
  CHECK(hr.missing == 1);
  CHECK(hr.missing_fraction_of_rows == doctest::Approx(1.0 / 3.0));
  CHECK(hr.missing_per_present == doctest::Approx(0.5));
  CHECK(s.languages[0].missing == 0);
}

TEST_CASE("stats on a complete corpus report no missing cells") {
  const auto s = corpus_stats(parse_corpus("en\tde\na\tb\nc\td\n"));
  for (const auto& l : s.languages) {
    CHECK(l.missing == 0);
    CHECK(l.missing_fraction_of_rows == 0.0);
  }
}

TEST_CASE("stats for the hr row of the corpus-size table") {
  // 118949 available hr sentences out of 154513 rows; 35564 missing.
  MultiCorpus c({"en", "hr"});
  for (std::size_t i = 0; i < 154513; ++i)
    c.add_row({Cell::original("x"), i < 118949 ? Cell::original("y") : Cell::missing()});
  const auto hr = corpus_stats(c).languages[1];
  CHECK(hr.present == 118949);
  CHECK(hr.missing == 35564);
  CHECK(hr.missing_per_present == doctest::Approx(0.299).epsilon(0.0005));
  CHECK(hr.missing_fraction_of_rows == doctest::Approx(0.230).epsilon(0.0005));
  const std::vector<std::string> langs{"en", "hr"};
  CHECK(filter_complete(c, langs).size() == 118949);
}

TEST_CASE("fill_null replaces only missing cells") {
  const auto c = fill_null(parse_corpus(kSample), "hr");
  CHECK(*c.cell(1, 1).text == kNullToken);
  CHECK(c.cell(1, 1).provenance == Provenance::NullFilled);
  CHECK(*c.cell(0, 1).text == "mačka");
  CHECK_FALSE(c.cell(2, 2).present());
}

TEST_CASE("filter_complete excludes null-filled cells") {
  const auto c = fill_null(parse_corpus(kSample), "hr");
  const std::vector<std::string> langs{"en", "hr"};
  const auto f = filter_complete(c, langs);
  CHECK(f.size() == 2);
  const std::vector<std::string> all{"en", "hr", "sr"};
  CHECK(filter_complete(c, all).size() == 1);
}

TEST_CASE("split is deterministic, disjoint, and keeps complete test rows") {
  MultiCorpus c({"en", "hr"});
  Rng rng(4);
  for (int i = 0; i < 200; ++i)
    c.add_row({Cell::original("s" + std::to_string(i)),
               rng.uniform() < 0.3 ? Cell::missing() : Cell::original("t" + std::to_string(i))});
  const std::vector<double> fr{0.8, 0.1, 0.1};
  const auto a = split(c, fr, 9);
  const auto b = split(c, fr, 9);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() == 160);
  CHECK(a.valid.size() == 20);
  CHECK(a.test.size() <= 20);
  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const auto& row : part->rows()) CHECK(seen.insert(*row[0].text).second);
  for (const auto& row : a.test.rows()) CHECK(row_complete(row));
  const std::vector<double> bad{0.5, 0.5, 0.5};
  CHECK_THROWS_AS(split(c, bad, 1), ContractError);
}
