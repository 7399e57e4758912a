#include "msnmt/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "msnmt/ops.hpp"
#include "msnmt/rng.hpp"

namespace msnmt {

void TrainConfig::validate() const {
  if (d_embed == 0 || d_lstm == 0 || d_dec == 0) throw ContractError("model dimensions must be positive");
  if (d_dec != 2 * d_lstm)
    throw ContractError("d_dec (" + std::to_string(d_dec) + ") must be 2*d_lstm (" + std::to_string(2 * d_lstm) + ")");
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
  if (!(clip_norm > 0.0)) throw ContractError("clip_norm must be positive");
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (patience == 0) throw ContractError("patience must be positive");
  if (max_epochs == 0) throw ContractError("max_epochs must be positive");
  if (!(init_range > 0.0)) throw ContractError("init_range must be positive");
}

namespace {

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> rows) {
  Batch batch;
  batch.rows.assign(rows.begin(), rows.end());
  const std::size_t n_sources = examples[rows[0]].sources.size();
  for (std::size_t s = 0; s < n_sources; ++s) {
    std::vector<std::vector<int>> column;
    for (auto r : rows) {
      if (examples[r].sources.size() != n_sources)
        throw ContractError("examples disagree on the number of sources");
      column.push_back(examples[r].sources[s]);
    }
    batch.sources.push_back(pad_sequences(column));
  }
  std::vector<std::vector<int>> targets;
  for (auto r : rows) targets.push_back(examples[r].target);
  batch.target = pad_sequences(targets);
  return batch;
}

std::vector<Batch> chunk(std::span<const Example> examples, const std::vector<std::size_t>& order,
                         std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto n = std::min(batch_size, order.size() - start);
    out.push_back(make_batch(examples, std::span(order).subspan(start, n)));
  }
  return out;
}

}  // namespace

std::vector<Batch> batchify(std::span<const Example> examples, std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  return chunk(examples, order, batch_size);
}

std::vector<Batch> batchify_in_order(std::span<const Example> examples, std::size_t batch_size) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  return chunk(examples, order, batch_size);
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, const AdamHyper& hyper, long t) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw ContractError("adam_step: parameter, gradient and moment sizes differ");
  if (t < 1) throw ContractError("adam_step: step counter starts at 1");
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grads[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

void Adam::step(std::span<const NamedTensor> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor->size(), 0.0);
      v_.emplace_back(p.tensor->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam: parameter list changed between steps");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = *params[i].tensor;
    t.ensure_grad();
    adam_step(t.values, t.grad, m_[i], v_[i], hyper_, t_);
  }
}

double global_grad_norm(std::span<const NamedTensor> params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.tensor->grad) sq += g * g;
  return std::sqrt(sq);
}

double clip_gradients(std::span<const NamedTensor> params, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ContractError("clip_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > clip_norm) {
    const double factor = clip_norm / norm;
    for (const auto& p : params)
      for (double& g : p.tensor->grad) g *= factor;
  }
  return norm;
}

std::string TrainReport::format() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& e : epochs) out << e.epoch << '\t' << e.train_loss << '\t' << e.valid_nll << '\n';
  return out.str();
}

double total_nll(const MultiEncoderModel& model, std::span<const Example> examples, std::size_t batch_size) {
  double total = 0.0;
  for (const auto& batch : batchify_in_order(examples, batch_size)) {
    ag::Graph g;
    const BoundModel m(g, model);
    total += sequence_loss(m, batch.sources, batch.target, 1.0).value().values[0];
  }
  return total;
}

TrainResult train(MultiEncoderModel model, std::span<const Example> train_set, std::span<const Example> valid_set,
                  const TrainConfig& config, const std::string& checkpoint_dir,
                  const Metadata& checkpoint_metadata) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (valid_set.empty()) throw ContractError("train: empty validation set");

  Adam adam(AdamHyper{.learning_rate = config.learning_rate});
  auto params = model.parameters();
  TrainResult result{model, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const auto shuffle_seed = derive_seed(config.seed, "shuffle");

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = batchify(train_set, config.batch_size, shuffle_seed + epoch);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      for (auto& p : params) p.tensor->zero_grad();
      double loss_value = 0.0;
      try {
        ag::Graph g;
        const BoundModel m(g, model);
        const double weight = 1.0 / static_cast<double>(batch.target.batch);
        const auto loss = sequence_loss(m, batch.sources, batch.target, weight);
        loss_value = loss.value().values[0];
        g.backward(loss);
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(bi) + ": " + e.what());
      }
      const double norm = clip_gradients(params, config.clip_norm);
      if (!std::isfinite(loss_value) || !std::isfinite(norm))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(bi) + ": non-finite loss or gradient");
      adam.step(params);
      epoch_loss += loss_value * static_cast<double>(batch.target.batch);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    rec.valid_nll = total_nll(model, valid_set, config.batch_size) / static_cast<double>(valid_set.size());
    if (!std::isfinite(rec.valid_nll))
      throw DivergenceError("validation NLL is not finite after epoch " + std::to_string(epoch));
    result.report.epochs.push_back(rec);
    if (rec.valid_nll < best) {
      best = rec.valid_nll;
      result.report.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  for (auto& p : result.model.parameters()) p.tensor->grad.clear();
  if (!checkpoint_dir.empty()) {
    save_checkpoint(checkpoint_dir, result.model, checkpoint_metadata);
    result.report.checkpoint = checkpoint_dir;
  }
  return result;
}

}  // namespace msnmt
