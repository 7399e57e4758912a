#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "../support/gradcheck.hpp"
#include "msnmt/errors.hpp"
#include "msnmt/ops.hpp"
#include "msnmt/seq2seq.hpp"
#include "msnmt/tokens.hpp"

using namespace msnmt;
namespace fs = std::filesystem;

namespace {

ModelDims tiny_dims(std::size_t n_sources = 2) {
  ModelDims d;
  d.n_sources = n_sources;
  d.source_vocab.assign(n_sources, 7);
  d.target_vocab = 7;
  d.d_embed = 4;
  d.d_lstm = 2;
  d.d_dec = 4;
  return d;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

Tensor row_of(const Tensor& t, std::size_t b) {
  const auto d = t.shape.back();
  return Tensor(Shape{d}, Buffer(t.values.begin() + b * d, t.values.begin() + (b + 1) * d));
}

}  // namespace

TEST_CASE("model dims: decoder size must equal the encoder annotation size") {
  auto d = tiny_dims();
  d.d_dec = 5;
  CHECK_THROWS_AS(d.validate(), ContractError);
  d = tiny_dims();
  d.target_vocab = 4;
  CHECK_THROWS_AS(d.validate(), ContractError);
  CHECK_NOTHROW(tiny_dims().validate());
}

TEST_CASE("parameter shapes follow the dims") {
  auto m = MultiEncoderModel::initialize(tiny_dims(), 1);
  CHECK(m.encoders.size() == 2);
  CHECK(m.encoders[0].forward.weight.shape == Shape{8, 6});
  CHECK(m.encoders[0].attention.shape == Shape{4, 4});
  CHECK(m.decoder_lstm.weight.shape == Shape{16, 12});
  CHECK(m.init_proj.shape == Shape{4, 8});
  CHECK(m.combine_proj.shape == Shape{4, 12});
  std::size_t n = 0;
  for (const auto& p : m.parameters()) {
    n += p.tensor->size();
    for (double v : p.tensor->values) CHECK(std::abs(v) <= 0.1);
  }
  CHECK(n == m.parameter_count());
}

TEST_CASE("initialization is deterministic in the seed") {
  auto a = MultiEncoderModel::initialize(tiny_dims(), 5);
  auto b = MultiEncoderModel::initialize(tiny_dims(), 5);
  auto c = MultiEncoderModel::initialize(tiny_dims(), 6);
  CHECK(a.output_weight.values == b.output_weight.values);
  CHECK(a.output_weight.values != c.output_weight.values);
}

TEST_CASE("end-to-end gradient check on a two-encoder model") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 11, 0.5);
  const std::vector<std::vector<int>> s1{{5, 6, 3}, {4}};
  const std::vector<std::vector<int>> s2{{6, 5}, {3, 5, 6}};
  const std::vector<std::vector<int>> tg{{5, 6}, {6, 3, 5}};
  const std::vector<PaddedBatch> sources{pad_sequences(s1), pad_sequences(s2)};
  const auto target = pad_sequences(tg);
  const auto r = testing::check_model_gradients(
      model, [&](const BoundModel& m) { return sequence_loss(m, sources, target, 0.5); });
  INFO("worst ", r.worst);
  CHECK(r.checked == model.parameter_count());
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("padding does not change a sentence's encoding") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 3, 0.5);
  ag::Graph g;
  const BoundModel m(g, model);
  const std::vector<std::vector<int>> seqs{{5, 6}, {4, 5, 6}};
  const auto batch = encode_batch(m, 0, pad_sequences(seqs));
  const auto alone = encode(m, 0, seqs[0]);
  CHECK(max_abs_diff(row_of(batch.h.value(), 0), alone.h.value()) < 1e-12);
  CHECK(max_abs_diff(row_of(batch.c.value(), 0), alone.c.value()) < 1e-12);
}

TEST_CASE("attention weights sum to one and ignore padding") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 4, 0.5);
  ag::Graph g;
  const BoundModel m(g, model);
  const std::vector<std::vector<int>> seqs{{5}, {4, 5, 6}};
  const auto enc = encode_batch(m, 1, pad_sequences(seqs));
  const std::vector<EncoderOutput> encs{enc, enc};
  const auto state = init_decoder_multi(m, encs);
  const auto w = attention_weights(m, state.h, enc, 1).value();
  CHECK(w.shape == Shape{2, 3});
  CHECK(w.at(0, 0) == doctest::Approx(1.0));
  CHECK(w.at(0, 1) == 0.0);
  CHECK(w.at(1, 0) + w.at(1, 1) + w.at(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("decoder initial cell is the sum of encoder cells") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 8, 0.5);
  ag::Graph g;
  const BoundModel m(g, model);
  const std::vector<std::vector<int>> a{{5, 6}}, b{{4}};
  const std::vector<EncoderOutput> encs{encode_batch(m, 0, pad_sequences(a)), encode_batch(m, 1, pad_sequences(b))};
  const auto state = init_decoder_multi(m, encs);
  const auto& c = state.c.value();
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c.values[i] == doctest::Approx(encs[0].c.value().values[i] + encs[1].c.value().values[i]));
  for (double v : state.feed.value().values) CHECK(v == 0.0);
}

TEST_CASE("batched greedy decoding matches sentence-by-sentence decoding") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 21, 0.8);
  const std::vector<std::vector<std::vector<int>>> sentences{
      {{5, 6, 3}, {4}}, {{6}, {5, 5, 6}}, {{kNullId}, {6, 3}}};
  const std::vector<std::size_t> caps{4, 6, 3};
  const auto batched = translate_batch(model, sentences, caps);
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const auto single = translate(model, sentences[k], caps[k]);
    CHECK(single.tokens == batched[k].tokens);
    CHECK(single.finished == batched[k].finished);
    CHECK(single.score == doctest::Approx(batched[k].score));
    CHECK(single.tokens.size() <= caps[k]);
    for (int t : single.tokens) CHECK(t != kEosId);
  }
}

TEST_CASE("default length cap is twice the longest source plus ten") {
  const std::vector<std::vector<int>> s{{5, 6, 7}, {5}};
  CHECK(default_max_len(s) == 16);
}

TEST_CASE("zero length cap yields an empty unfinished hypothesis") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 2);
  const std::vector<std::vector<int>> s{{5}, {6}};
  const auto h = translate(model, s, 0);
  CHECK(h.tokens.empty());
  CHECK_FALSE(h.finished);
}

TEST_CASE("empty source sequence is rejected") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 2);
  const std::vector<std::vector<int>> s{{}, {6}};
  CHECK_THROWS(translate(model, s, 5));
}

TEST_CASE("a model whose output bias favours end-of-sentence stops at once") {
  auto model = MultiEncoderModel::initialize(tiny_dims(), 2);
  model.output_bias.values[kEosId] = 20.0;
  const std::vector<std::vector<int>> s{{5}, {6}};
  const auto h = translate(model, s, 10);
  CHECK(h.tokens.empty());
  CHECK(h.finished);
  CHECK(h.score < 0.0);
  CHECK(h.score > -1e-6);
}

TEST_CASE("sequence loss of a batch equals the sum of single-sentence losses") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 31, 0.5);
  const std::vector<std::vector<int>> s1{{5, 6, 3}, {4}};
  const std::vector<std::vector<int>> s2{{6, 5}, {3, 5, 6}};
  const std::vector<std::vector<int>> tg{{5, 6}, {6, 3, 5}};
  const auto loss_of = [&](std::size_t lo, std::size_t hi) {
    ag::Graph g;
    const BoundModel m(g, model);
    const std::vector<std::vector<int>> a(s1.begin() + lo, s1.begin() + hi), b(s2.begin() + lo, s2.begin() + hi),
        t(tg.begin() + lo, tg.begin() + hi);
    const std::vector<PaddedBatch> src{pad_sequences(a), pad_sequences(b)};
    return sequence_loss(m, src, pad_sequences(t), 1.0).value().values[0];
  };
  CHECK(loss_of(0, 2) == doctest::Approx(loss_of(0, 1) + loss_of(1, 2)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip restores every parameter bit for bit") {
  const auto model = MultiEncoderModel::initialize(tiny_dims(), 41);
  const auto dir = fs::temp_directory_path() / "msnmt_ckpt_test";
  fs::remove_all(dir);
  save_checkpoint(dir.string(), model, {{"note", "x"}});
  Metadata meta;
  auto back = load_checkpoint(dir.string(), &meta);
  CHECK(meta.at("note") == "x");
  CHECK(meta.at("n_sources") == "2");
  auto orig = model;
  const auto a = orig.parameters();
  const auto b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor->values == b[i].tensor->values);
  }
  fs::remove_all(dir);
}

TEST_CASE("loading a missing checkpoint fails with an io error") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/msnmt/ckpt"), IoError);
}
