#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msnmt/seq2seq.hpp"

namespace msnmt {

struct TrainConfig {
  std::size_t d_embed = 64;
  std::size_t d_lstm = 64;
  std::size_t d_dec = 128;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  std::size_t max_epochs = 30;
  std::uint64_t seed = 1;
  double init_range = 0.1;

  void validate() const;
};

// One training pair: the token ids for each source and for the target.
struct Example {
  std::vector<std::vector<int>> sources;
  std::vector<int> target;
};

struct Batch {
  std::vector<std::size_t> rows;  // indices into the example list
  std::vector<PaddedBatch> sources;
  PaddedBatch target;
};

// Seeded shuffle, then consecutive chunks of batch_size (the last may be short).
// Each stream is padded to its own maximum length.
std::vector<Batch> batchify(std::span<const Example> examples, std::size_t batch_size, std::uint64_t seed);
// Same, without shuffling.
std::vector<Batch> batchify_in_order(std::span<const Example> examples, std::size_t batch_size);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update at step t (t >= 1), in place.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, const AdamHyper& hyper, long t);

class Adam {
 public:
  explicit Adam(AdamHyper hyper) : hyper_(hyper) {}
  // Applies one update to every tensor from its grad.
  void step(std::span<const NamedTensor> params);
  long steps() const { return t_; }

 private:
  AdamHyper hyper_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

double global_grad_norm(std::span<const NamedTensor> params);
// Rescales all grads by clip_norm / G when the global L2 norm G exceeds
// clip_norm. Returns G.
double clip_gradients(std::span<const NamedTensor> params, double clip_norm);

class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-sentence loss
  double valid_nll = 0.0;   // mean per-sentence negative log-likelihood
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string checkpoint;

  // "epoch\ttrain_loss\tvalid_nll" lines.
  std::string format() const;
};

struct TrainResult {
  MultiEncoderModel model;  // parameters of the best validation epoch
  TrainReport report;
};

// Σ over examples of the summed token negative log-likelihood.
double total_nll(const MultiEncoderModel& model, std::span<const Example> examples, std::size_t batch_size);

// Epochs of shuffled mini-batches with clipped Adam updates; keeps the
// parameters of the epoch with the lowest validation NLL and stops after
// `patience` epochs without improvement. Writes the best model to
// checkpoint_dir when it is non-empty.
TrainResult train(MultiEncoderModel model, std::span<const Example> train_set, std::span<const Example> valid_set,
                  const TrainConfig& config, const std::string& checkpoint_dir = {},
                  const Metadata& checkpoint_metadata = {});

}  // namespace msnmt
