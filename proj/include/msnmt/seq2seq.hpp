#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msnmt/graph.hpp"
#include "msnmt/tensor.hpp"

namespace msnmt {

struct ModelDims {
  std::size_t n_sources = 2;
  std::vector<std::size_t> source_vocab;
  std::size_t target_vocab = 0;
  std::size_t d_embed = 64;
  std::size_t d_lstm = 64;
  std::size_t d_dec = 128;

  // Bidirectional encoders concatenate both directions.
  std::size_t d_enc() const { return 2 * d_lstm; }
  // Throws ContractError on inconsistent sizes. The decoder cell is the sum
  // of encoder cells, so d_dec must equal d_enc.
  void validate() const;
};

struct LstmParams {
  Tensor weight;  // [4h, in + h]; gate blocks i, f, g, o
  Tensor bias;    // [4h]
};

struct EncoderParams {
  Tensor embed;      // [V_src, d_embed]
  LstmParams forward;
  LstmParams backward;
  Tensor attention;  // [d_dec, d_enc], bilinear score h_tᵀ·W·annotation
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

// N source encoders, one attentional decoder with input feeding.
struct MultiEncoderModel {
  ModelDims dims;
  std::vector<EncoderParams> encoders;
  Tensor decoder_embed;  // [V_tgt, d_embed]
  LstmParams decoder_lstm;  // input = [embedding; feed]
  Tensor init_proj;      // [d_dec, N·d_enc], decoder h0 = tanh(W·[h_1;…;h_N])
  Tensor combine_proj;   // [d_dec, d_dec + N·d_enc], h̃_t = tanh(W·[h_t;d_t^1;…])
  Tensor output_weight;  // [V_tgt, d_dec]
  Tensor output_bias;    // [V_tgt]

  // Parameters uniform in [-range, range].
  static MultiEncoderModel initialize(const ModelDims& dims, std::uint64_t seed, double range = 0.1);
  // Same shapes, all zeros.
  static MultiEncoderModel zeros(const ModelDims& dims);

  std::size_t n_sources() const { return dims.n_sources; }
  // Fixed order; names are also the checkpoint file stems.
  std::vector<NamedTensor> parameters();
  std::size_t parameter_count() const;
};

using Metadata = std::map<std::string, std::string>;

// Directory of <name>.bin tensors plus metadata.txt (key=value).
void save_checkpoint(const std::string& dir, const MultiEncoderModel& model, const Metadata& extra = {});
MultiEncoderModel load_checkpoint(const std::string& dir, Metadata* metadata = nullptr);

// Sequences padded to a common length, stored time-major: ids[t * batch + b].
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int> ids;
  std::vector<std::size_t> lengths;

  int at(std::size_t t, std::size_t b) const { return ids[t * batch + b]; }
  std::span<const int> column(std::size_t t) const { return {ids.data() + t * batch, batch}; }
};

PaddedBatch pad_sequences(std::span<const std::vector<int>> seqs);

// Model parameters as nodes of one graph.
class BoundModel {
 public:
  // Differentiable binding: backward accumulates into the model's grads.
  BoundModel(ag::Graph& graph, MultiEncoderModel& model);
  // Read-only binding for inference.
  BoundModel(ag::Graph& graph, const MultiEncoderModel& model);

  ag::Graph& graph() const { return *graph_; }
  const ModelDims& dims() const { return dims_; }

  struct Lstm {
    ag::Var weight, bias;
  };
  struct Encoder {
    ag::Var embed;
    Lstm forward, backward;
    ag::Var attention;
  };

  std::vector<Encoder> encoders;
  ag::Var decoder_embed;
  Lstm decoder_lstm;
  ag::Var init_proj, combine_proj, output_weight, output_bias;

 private:
  template <class Model, class BindFn>
  void bind(Model& model, BindFn fn);

  ag::Graph* graph_;
  ModelDims dims_;
};

struct EncoderOutput {
  ag::Var annotations;  // [B, T, d_enc]
  ag::Var h;            // [B, d_enc], concat of forward/backward finals
  ag::Var c;            // [B, d_enc]
  std::vector<std::size_t> lengths;
};

// Single-sentence view of an encoder pass.
struct EncoderFinalState {
  ag::Var h;            // [d_enc]
  ag::Var c;            // [d_enc]
  ag::Var annotations;  // [T, d_enc]
};

struct DecoderState {
  ag::Var h;     // [B, d_dec]
  ag::Var c;     // [B, d_dec]
  ag::Var feed;  // [B, d_dec], previous h̃
};

struct StepOutput {
  DecoderState state;
  ag::Var logits;  // [B, V_tgt]
};

EncoderOutput encode_batch(const BoundModel& m, std::size_t source_index, const PaddedBatch& tokens);
EncoderFinalState encode(const BoundModel& m, std::size_t source_index, std::span<const int> tokens);

DecoderState init_decoder_multi(const BoundModel& m, std::span<const EncoderOutput> finals);
// Attention weights over all source positions: [B, T].
ag::Var attention_weights(const BoundModel& m, ag::Var h_t, const EncoderOutput& enc,
                          std::size_t source_index);
ag::Var attention_context(const BoundModel& m, ag::Var h_t, const EncoderOutput& enc,
                          std::size_t source_index);
ag::Var combine_contexts(const BoundModel& m, ag::Var h_t, std::span<const ag::Var> contexts);
StepOutput decode_step(const BoundModel& m, const DecoderState& state, std::span<const int> prev_tokens,
                       std::span<const EncoderOutput> encoders);

// Σ_b weight · Σ_t -log p(y_t) over the target plus end-of-sentence, with
// padding masked out. sources[i] feeds encoder i.
ag::Var sequence_loss(const BoundModel& m, std::span<const PaddedBatch> sources,
                      const PaddedBatch& target, double weight_per_sentence);

struct Hypothesis {
  std::vector<int> tokens;  // excludes the end-of-sentence id
  double score = 0.0;       // Σ log p over emitted steps (including end-of-sentence)
  bool finished = false;    // true iff end-of-sentence was produced
};

// Greedy decoding cap used when none is given.
std::size_t default_max_len(std::span<const std::vector<int>> sources);

Hypothesis translate(const MultiEncoderModel& model, std::span<const std::vector<int>> sources,
                     std::size_t max_len);
// sentences[k] holds the N source sequences of sentence k.
std::vector<Hypothesis> translate_batch(const MultiEncoderModel& model,
                                        std::span<const std::vector<std::vector<int>>> sentences,
                                        std::span<const std::size_t> max_lens);

}  // namespace msnmt
