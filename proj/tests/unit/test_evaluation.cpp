#include <doctest.h>

#include <cmath>

#include "msnmt/errors.hpp"
#include "msnmt/evaluation.hpp"
#include "msnmt/rng.hpp"

using namespace msnmt;

namespace {

BleuReport score(const std::vector<std::string>& h, const std::vector<std::string>& r) { return bleu_lines(h, r); }

}  // namespace

TEST_CASE("bleu: identical sentence") {
  const auto r = score({"a b c d e"}, {"a b c d e"});
  CHECK(r.bleu == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.brevity_penalty == 1.0);
}

TEST_CASE("bleu: repeated word is clipped by the reference count") {
  const auto r = score({"the the the the the the the"}, {"the cat is on the mat"});
  CHECK(r.matches[0] == 2);
  CHECK(r.totals[0] == 7);
  CHECK(r.precisions[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(r.matches[1] == 0);
  CHECK(r.bleu == 0.0);
}

TEST_CASE("bleu: brevity penalty for a short hypothesis") {
  const auto r = score({"a b c d"}, {"a b c d e f"});
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)).epsilon(1e-12));
  CHECK(std::abs(r.bleu - 60.65306597126334) < 1e-6);
}

TEST_CASE("bleu: one substitution") {
  // p1 5/6, p2 3/5, p3 2/4, p4 1/3
  const auto r = score({"a b c d e f"}, {"a b c d x f"});
  CHECK(r.matches == std::array<std::size_t, 4>{5, 3, 2, 1});
  CHECK(r.totals == std::array<std::size_t, 4>{6, 5, 4, 3});
  CHECK(std::abs(r.bleu - 100.0 * std::pow(1.0 / 12.0, 0.25)) < 1e-6);
}

TEST_CASE("bleu: counts are pooled over the corpus") {
  // matches 8/9, 6/7, 4/5, 2/3; lengths 9 vs 10
  const auto r = score({"a b c d", "e f g h i"}, {"a b c d", "e f g h j k"});
  CHECK(r.hyp_length == 9);
  CHECK(r.ref_length == 10);
  const double expected =
      100.0 * std::exp(1.0 - 10.0 / 9.0) * std::pow(8.0 / 9.0 * 6.0 / 7.0 * 4.0 / 5.0 * 2.0 / 3.0, 0.25);
  CHECK(std::abs(r.bleu - expected) < 1e-6);
}

TEST_CASE("bleu: empty hypotheses score zero") {
  const auto r = score({""}, {"a b c d"});
  CHECK(r.hyp_length == 0);
  CHECK(r.brevity_penalty == 0.0);
  CHECK(r.bleu == 0.0);
}

TEST_CASE("bleu: mismatched or empty input is a contract error") {
  CHECK_THROWS_AS(score({"a"}, {"a", "b"}), ContractError);
  CHECK_THROWS_AS(score({}, {}), ContractError);
}

TEST_CASE("bleu of a sequence against itself is 100") {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    std::vector<std::string> toks(4 + rng.below(20));
    for (auto& t : toks) t = "w" + std::to_string(rng.below(6));
    const std::vector<std::vector<std::string>> h{toks};
    CHECK(bleu(h, h).bleu == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("bleu report format starts with the score") {
  const auto text = score({"a b c d"}, {"a b c d"}).format();
  CHECK(text.rfind("BLEU=100", 0) == 0);
  CHECK(text.find("BP=1") != std::string::npos);
}

TEST_CASE("translate_texts checks the codec against the model") {
  ModelDims d;
  d.n_sources = 2;
  d.source_vocab = {7, 7};
  d.target_vocab = 7;
  d.d_embed = 4;
  d.d_lstm = 2;
  d.d_dec = 4;
  const auto model = MultiEncoderModel::initialize(d, 1);
  const std::vector<std::string> text{"x"};
  const auto sw = SubwordModel::train(text, 0);
  Codec one{{&sw}, &sw};
  const std::vector<std::vector<std::string>> sentences{{"x", "x"}};
  CHECK_THROWS_AS(translate_texts(model, one, sentences), ContractError);
  Codec two{{&sw, &sw}, &sw};
  CHECK(translate_texts(model, two, sentences).size() == 1);
}
