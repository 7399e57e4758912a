#include "msnmt/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "msnmt/kvfile.hpp"
#include "msnmt/ops.hpp"
#include "msnmt/rng.hpp"
#include "msnmt/tokens.hpp"

namespace msnmt {

namespace fs = std::filesystem;
using ag::Var;

void ModelDims::validate() const {
  if (n_sources == 0) throw ContractError("model needs at least one source encoder");
  if (source_vocab.size() != n_sources)
    throw ContractError("expected " + std::to_string(n_sources) + " source vocabulary sizes, got " +
                        std::to_string(source_vocab.size()));
  for (auto v : source_vocab) {
    if (v <= static_cast<std::size_t>(kNullId))
      throw ContractError("source vocabulary too small: " + std::to_string(v));
  }
  if (target_vocab <= static_cast<std::size_t>(kNullId))
    throw ContractError("target vocabulary too small: " + std::to_string(target_vocab));
  if (d_embed == 0 || d_lstm == 0 || d_dec == 0) throw ContractError("model dimensions must be positive");
  if (d_dec != d_enc())
    throw ContractError("d_dec (" + std::to_string(d_dec) + ") must equal d_enc = 2*d_lstm (" +
                        std::to_string(d_enc()) + ") because the decoder cell is the sum of encoder cells");
}

namespace {

template <class Model, class Fn>
void visit_parameters(Model& m, Fn fn) {
  for (std::size_t i = 0; i < m.encoders.size(); ++i) {
    auto& e = m.encoders[i];
    const std::string p = "enc" + std::to_string(i) + ".";
    fn(p + "embed", e.embed);
    fn(p + "fwd.weight", e.forward.weight);
    fn(p + "fwd.bias", e.forward.bias);
    fn(p + "bwd.weight", e.backward.weight);
    fn(p + "bwd.bias", e.backward.bias);
    fn(p + "attention", e.attention);
  }
  fn(std::string("dec.embed"), m.decoder_embed);
  fn(std::string("dec.lstm.weight"), m.decoder_lstm.weight);
  fn(std::string("dec.lstm.bias"), m.decoder_lstm.bias);
  fn(std::string("init_proj"), m.init_proj);
  fn(std::string("combine_proj"), m.combine_proj);
  fn(std::string("out.weight"), m.output_weight);
  fn(std::string("out.bias"), m.output_bias);
}

LstmParams zero_lstm(std::size_t in, std::size_t hidden) {
  return {Tensor(Shape{4 * hidden, in + hidden}), Tensor(Shape{4 * hidden})};
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::size_t parse_size(const Metadata& md, const std::string& key) {
  const auto it = md.find(key);
  if (it == md.end()) throw ParseError("checkpoint metadata lacks '" + key + "'");
  return std::stoul(it->second);
}

}  // namespace

MultiEncoderModel MultiEncoderModel::zeros(const ModelDims& dims) {
  dims.validate();
  MultiEncoderModel m;
  m.dims = dims;
  const auto n = dims.n_sources;
  for (std::size_t i = 0; i < n; ++i) {
    EncoderParams e;
    e.embed = Tensor(Shape{dims.source_vocab[i], dims.d_embed});
    e.forward = zero_lstm(dims.d_embed, dims.d_lstm);
    e.backward = zero_lstm(dims.d_embed, dims.d_lstm);
    e.attention = Tensor(Shape{dims.d_dec, dims.d_enc()});
    m.encoders.push_back(std::move(e));
  }
  m.decoder_embed = Tensor(Shape{dims.target_vocab, dims.d_embed});
  m.decoder_lstm = zero_lstm(dims.d_embed + dims.d_dec, dims.d_dec);
  m.init_proj = Tensor(Shape{dims.d_dec, n * dims.d_enc()});
  m.combine_proj = Tensor(Shape{dims.d_dec, dims.d_dec + n * dims.d_enc()});
  m.output_weight = Tensor(Shape{dims.target_vocab, dims.d_dec});
  m.output_bias = Tensor(Shape{dims.target_vocab});
  return m;
}

MultiEncoderModel MultiEncoderModel::initialize(const ModelDims& dims, std::uint64_t seed, double range) {
  auto m = zeros(dims);
  Rng rng(seed);
  for (auto& p : m.parameters())
    for (auto& x : p.tensor->values) x = rng.uniform(-range, range);
  return m;
}

std::vector<NamedTensor> MultiEncoderModel::parameters() {
  std::vector<NamedTensor> out;
  visit_parameters(*this, [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

std::size_t MultiEncoderModel::parameter_count() const {
  std::size_t n = 0;
  visit_parameters(*this, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

void save_checkpoint(const std::string& dir, const MultiEncoderModel& model, const Metadata& extra) {
  fs::create_directories(dir);
  visit_parameters(model, [&](const std::string& name, const Tensor& t) {
    save_tensor((fs::path(dir) / (name + ".bin")).string(), t);
  });
  Metadata md = extra;
  md["n_sources"] = std::to_string(model.dims.n_sources);
  md["d_enc"] = std::to_string(model.dims.d_enc());
  md["d_dec"] = std::to_string(model.dims.d_dec);
  md["d_embed"] = std::to_string(model.dims.d_embed);
  md["d_lstm"] = std::to_string(model.dims.d_lstm);
  md["source_vocab_sizes"] = join_sizes(model.dims.source_vocab);
  md["target_vocab_size"] = std::to_string(model.dims.target_vocab);
  write_key_values((fs::path(dir) / "metadata.txt").string(), md);
}

MultiEncoderModel load_checkpoint(const std::string& dir, Metadata* metadata) {
  const auto md = read_key_values((fs::path(dir) / "metadata.txt").string());
  ModelDims dims;
  dims.n_sources = parse_size(md, "n_sources");
  dims.d_dec = parse_size(md, "d_dec");
  dims.d_embed = parse_size(md, "d_embed");
  dims.d_lstm = parse_size(md, "d_lstm");
  dims.target_vocab = parse_size(md, "target_vocab_size");
  {
    const auto it = md.find("source_vocab_sizes");
    if (it == md.end()) throw ParseError("checkpoint metadata lacks 'source_vocab_sizes'");
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) dims.source_vocab.push_back(std::stoul(tok));
  }
  if (parse_size(md, "d_enc") != dims.d_enc()) throw ParseError("checkpoint d_enc disagrees with d_lstm");
  auto model = MultiEncoderModel::zeros(dims);
  for (auto& p : model.parameters()) {
    auto loaded = load_tensor((fs::path(dir) / (p.name + ".bin")).string());
    if (loaded.shape != p.tensor->shape)
      throw ShapeError("checkpoint tensor " + p.name + " has shape " + shape_string(loaded.shape) +
                       ", expected " + shape_string(p.tensor->shape));
    *p.tensor = std::move(loaded);
  }
  if (metadata) *metadata = md;
  return model;
}

PaddedBatch pad_sequences(std::span<const std::vector<int>> seqs) {
  PaddedBatch pb;
  pb.batch = seqs.size();
  for (const auto& s : seqs) {
    pb.lengths.push_back(s.size());
    pb.steps = std::max(pb.steps, s.size());
  }
  pb.ids.assign(pb.steps * pb.batch, kPadId);
  for (std::size_t b = 0; b < pb.batch; ++b)
    for (std::size_t t = 0; t < seqs[b].size(); ++t) pb.ids[t * pb.batch + b] = seqs[b][t];
  return pb;
}

template <class Model, class BindFn>
void BoundModel::bind(Model& model, BindFn fn) {
  for (auto& e : model.encoders) {
    Encoder be;
    be.embed = fn(e.embed);
    be.forward = {fn(e.forward.weight), fn(e.forward.bias)};
    be.backward = {fn(e.backward.weight), fn(e.backward.bias)};
    be.attention = fn(e.attention);
    encoders.push_back(be);
  }
  decoder_embed = fn(model.decoder_embed);
  decoder_lstm = {fn(model.decoder_lstm.weight), fn(model.decoder_lstm.bias)};
  init_proj = fn(model.init_proj);
  combine_proj = fn(model.combine_proj);
  output_weight = fn(model.output_weight);
  output_bias = fn(model.output_bias);
}

BoundModel::BoundModel(ag::Graph& graph, MultiEncoderModel& model) : graph_(&graph), dims_(model.dims) {
  bind(model, [&](Tensor& t) { return graph.parameter(t); });
}

BoundModel::BoundModel(ag::Graph& graph, const MultiEncoderModel& model)
    : graph_(&graph), dims_(model.dims) {
  bind(model, [&](const Tensor& t) { return graph.constant_ref(t); });
}

namespace {

struct CellState {
  Var h, c;
};

CellState lstm_cell(const BoundModel::Lstm& p, Var x, Var h, Var c, std::size_t hidden) {
  const Var xh[] = {x, h};
  const Var gates = ag::linear(ag::concat(xh, 1), p.weight, p.bias);
  const std::size_t sizes[] = {hidden, hidden, hidden, hidden};
  const auto parts = ag::split(gates, 1, sizes);
  const Var i = ag::sigmoid(parts[0]);
  const Var f = ag::sigmoid(parts[1]);
  const Var g = ag::tanh(parts[2]);
  const Var o = ag::sigmoid(parts[3]);
  const Var c2 = ag::add(ag::mul(f, c), ag::mul(i, g));
  return {ag::mul(o, ag::tanh(c2)), c2};
}

// Rows with keep[b] take `fresh`, the others keep `old`; exact in both cases.
Var blend_rows(ag::Graph& g, const std::vector<bool>& keep, Var fresh, Var old) {
  const auto& s = fresh.shape();
  Tensor on(s), off(s);
  for (std::size_t b = 0; b < s[0]; ++b)
    for (std::size_t j = 0; j < s[1]; ++j) {
      on.at(b, j) = keep[b] ? 1.0 : 0.0;
      off.at(b, j) = keep[b] ? 0.0 : 1.0;
    }
  return ag::add(ag::mul(g.constant(std::move(on)), fresh), ag::mul(g.constant(std::move(off)), old));
}

}  // namespace

EncoderOutput encode_batch(const BoundModel& m, std::size_t source_index, const PaddedBatch& tokens) {
  const auto& dims = m.dims();
  if (source_index >= dims.n_sources)
    throw ContractError("source index " + std::to_string(source_index) + " but model has " +
                        std::to_string(dims.n_sources) + " encoders");
  if (tokens.batch == 0) throw ContractError("encode: empty batch");
  for (auto len : tokens.lengths)
    if (len == 0) throw ContractError("encode: empty token sequence");
  auto& g = m.graph();
  const auto& enc = m.encoders[source_index];
  const std::size_t B = tokens.batch, T = tokens.steps, H = dims.d_lstm;

  std::vector<Var> embedded(T);
  for (std::size_t t = 0; t < T; ++t) embedded[t] = ag::lookup(enc.embed, tokens.column(t));

  const auto active = [&](std::size_t t) {
    std::vector<bool> keep(B);
    bool all = true;
    for (std::size_t b = 0; b < B; ++b) {
      keep[b] = t < tokens.lengths[b];
      all = all && keep[b];
    }
    return std::pair{keep, all};
  };

  std::vector<Var> fwd(T), bwd(T);
  CellState f{g.constant(Tensor(Shape{B, H})), g.constant(Tensor(Shape{B, H}))};
  for (std::size_t t = 0; t < T; ++t) {
    auto next = lstm_cell(enc.forward, embedded[t], f.h, f.c, H);
    const auto [keep, all] = active(t);
    if (!all) next = {blend_rows(g, keep, next.h, f.h), blend_rows(g, keep, next.c, f.c)};
    f = next;
    fwd[t] = f.h;
  }
  CellState r{g.constant(Tensor(Shape{B, H})), g.constant(Tensor(Shape{B, H}))};
  for (std::size_t t = T; t-- > 0;) {
    auto next = lstm_cell(enc.backward, embedded[t], r.h, r.c, H);
    const auto [keep, all] = active(t);
    if (!all) next = {blend_rows(g, keep, next.h, r.h), blend_rows(g, keep, next.c, r.c)};
    r = next;
    bwd[t] = r.h;
  }

  std::vector<Var> annot(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Var pair[] = {fwd[t], bwd[t]};
    annot[t] = ag::concat(pair, 1);
  }
  EncoderOutput out;
  out.annotations = ag::reshape(ag::concat(annot, 1), Shape{B, T, 2 * H});
  const Var hs[] = {f.h, r.h};
  const Var cs[] = {f.c, r.c};
  out.h = ag::concat(hs, 1);
  out.c = ag::concat(cs, 1);
  out.lengths = tokens.lengths;
  return out;
}

EncoderFinalState encode(const BoundModel& m, std::size_t source_index, std::span<const int> tokens) {
  const std::vector<int> seq(tokens.begin(), tokens.end());
  const auto batch = pad_sequences(std::span(&seq, 1));
  const auto out = encode_batch(m, source_index, batch);
  const std::size_t d = m.dims().d_enc();
  return {ag::reshape(out.h, Shape{d}), ag::reshape(out.c, Shape{d}),
          ag::reshape(out.annotations, Shape{seq.size(), d})};
}

DecoderState init_decoder_multi(const BoundModel& m, std::span<const EncoderOutput> finals) {
  const auto& dims = m.dims();
  if (finals.size() != dims.n_sources)
    throw ContractError("init_decoder_multi: got " + std::to_string(finals.size()) +
                        " encoder states for a model with " + std::to_string(dims.n_sources));
  std::vector<Var> hs;
  for (const auto& f : finals) hs.push_back(f.h);
  const Var h = ag::tanh(ag::linear(ag::concat(hs, 1), m.init_proj));
  Var c = finals[0].c;
  for (std::size_t i = 1; i < finals.size(); ++i) c = ag::add(c, finals[i].c);
  const std::size_t B = h.shape()[0];
  return {h, c, m.graph().constant(Tensor(Shape{B, dims.d_dec}))};
}

Var attention_weights(const BoundModel& m, Var h_t, const EncoderOutput& enc, std::size_t source_index) {
  const Var query = ag::matmul(h_t, m.encoders.at(source_index).attention);
  return ag::masked_softmax(ag::batched_dot(query, enc.annotations), enc.lengths);
}

Var attention_context(const BoundModel& m, Var h_t, const EncoderOutput& enc, std::size_t source_index) {
  return ag::weighted_sum(attention_weights(m, h_t, enc, source_index), enc.annotations);
}

Var combine_contexts(const BoundModel& m, Var h_t, std::span<const Var> contexts) {
  if (contexts.size() != m.dims().n_sources)
    throw ContractError("combine_contexts: got " + std::to_string(contexts.size()) +
                        " contexts for a model with " + std::to_string(m.dims().n_sources));
  std::vector<Var> parts{h_t};
  parts.insert(parts.end(), contexts.begin(), contexts.end());
  return ag::tanh(ag::linear(ag::concat(parts, 1), m.combine_proj));
}

StepOutput decode_step(const BoundModel& m, const DecoderState& state, std::span<const int> prev_tokens,
                       std::span<const EncoderOutput> encoders) {
  const auto& dims = m.dims();
  const Var emb = ag::lookup(m.decoder_embed, prev_tokens);
  const Var input[] = {emb, state.feed};
  const auto cell = lstm_cell(m.decoder_lstm, ag::concat(input, 1), state.h, state.c, dims.d_dec);
  std::vector<Var> contexts;
  for (std::size_t i = 0; i < encoders.size(); ++i)
    contexts.push_back(attention_context(m, cell.h, encoders[i], i));
  const Var htilde = combine_contexts(m, cell.h, contexts);
  const Var logits = ag::linear(htilde, m.output_weight, m.output_bias);
  return {{cell.h, cell.c, htilde}, logits};
}

Var sequence_loss(const BoundModel& m, std::span<const PaddedBatch> sources, const PaddedBatch& target,
                  double weight_per_sentence) {
  const auto& dims = m.dims();
  if (sources.size() != dims.n_sources)
    throw ContractError("sequence_loss: got " + std::to_string(sources.size()) + " sources for " +
                        std::to_string(dims.n_sources) + " encoders");
  const std::size_t B = target.batch;
  for (const auto& s : sources)
    if (s.batch != B) throw ContractError("sequence_loss: source and target batch sizes differ");
  std::vector<EncoderOutput> encs;
  for (std::size_t i = 0; i < sources.size(); ++i) encs.push_back(encode_batch(m, i, sources[i]));
  DecoderState state = init_decoder_multi(m, encs);

  Var total;
  std::vector<int> prev(B), gold(B);
  std::vector<double> weight(B);
  for (std::size_t t = 0; t <= target.steps; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t len = target.lengths[b];
      prev[b] = t == 0 ? kBosId : (t - 1 < len ? target.at(t - 1, b) : kPadId);
      gold[b] = t < len ? target.at(t, b) : (t == len ? kEosId : kPadId);
      weight[b] = t <= len ? weight_per_sentence : 0.0;
    }
    auto step = decode_step(m, state, prev, encs);
    const Var loss = ag::cross_entropy(step.logits, gold, weight);
    total = total.valid() ? ag::add(total, loss) : loss;
    state = step.state;
  }
  return total;
}

std::size_t default_max_len(std::span<const std::vector<int>> sources) {
  std::size_t longest = 0;
  for (const auto& s : sources) longest = std::max(longest, s.size());
  return 2 * longest + 10;
}

std::vector<Hypothesis> translate_batch(const MultiEncoderModel& model,
                                        std::span<const std::vector<std::vector<int>>> sentences,
                                        std::span<const std::size_t> max_lens) {
  const std::size_t B = sentences.size();
  if (max_lens.size() != B) throw ContractError("translate_batch: one max_len per sentence required");
  std::vector<Hypothesis> hyps(B);
  std::vector<bool> active(B);
  bool any = false;
  for (std::size_t b = 0; b < B; ++b) {
    if (sentences[b].size() != model.n_sources())
      throw ContractError("translate: sentence has " + std::to_string(sentences[b].size()) +
                          " sources, model has " + std::to_string(model.n_sources()));
    active[b] = max_lens[b] > 0;
    any = any || active[b];
  }
  if (!any) return hyps;

  ag::Graph g;
  const BoundModel m(g, model);
  std::vector<EncoderOutput> encs;
  for (std::size_t i = 0; i < model.n_sources(); ++i) {
    std::vector<std::vector<int>> column;
    for (const auto& s : sentences) column.push_back(s[i]);
    encs.push_back(encode_batch(m, i, pad_sequences(column)));
  }
  DecoderState state = init_decoder_multi(m, encs);
  std::vector<int> prev(B, kBosId);
  const std::size_t V = model.dims.target_vocab;
  while (any) {
    auto step = decode_step(m, state, prev, encs);
    const auto& logits = step.logits.value().values;
    any = false;
    for (std::size_t b = 0; b < B; ++b) {
      if (!active[b]) {
        prev[b] = kPadId;
        continue;
      }
      const double* row = logits.data() + b * V;
      const auto best = static_cast<std::size_t>(std::max_element(row, row + V) - row);
      double z = 0.0;
      for (std::size_t j = 0; j < V; ++j) z += std::exp(row[j] - row[best]);
      hyps[b].score += -std::log(z);
      const int token = static_cast<int>(best);
      if (token == kEosId) {
        hyps[b].finished = true;
        active[b] = false;
      } else {
        hyps[b].tokens.push_back(token);
        if (hyps[b].tokens.size() >= max_lens[b]) active[b] = false;
      }
      prev[b] = token;
      any = any || active[b];
    }
    state = step.state;
  }
  return hyps;
}

Hypothesis translate(const MultiEncoderModel& model, std::span<const std::vector<int>> sources,
                     std::size_t max_len) {
  const std::vector<std::vector<int>> sentence(sources.begin(), sources.end());
  return translate_batch(model, std::span(&sentence, 1), std::span(&max_len, 1)).front();
}

}  // namespace msnmt
