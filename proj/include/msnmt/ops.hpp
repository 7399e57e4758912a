#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msnmt/graph.hpp"

// Differentiable operations over graph nodes. Shapes must match exactly;
// the only implicit broadcast is scale() (scalar times tensor).
namespace msnmt::ag {

Var matmul(Var a, Var b);
// x[B,in]·Wᵀ + bias, W stored as [out,in]. x may also be a vector [in].
// Pass an invalid Var for no bias.
Var linear(Var x, Var weight, Var bias = {});

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
// Sum of all elements, as a rank-0 scalar.
Var sum(Var a);

Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
std::vector<Var> split(Var a, std::size_t axis, std::span<const std::size_t> sizes);
Var reshape(Var a, Shape shape);

// Softmax over the last axis (vector, or each row of a matrix).
Var softmax(Var a);

Var lookup(Var table, int index);
// Rows of table for a batch of ids: [ids.size(), d].
Var lookup(Var table, std::span<const int> ids);

// -log softmax(logits)[target] for a vector of logits.
Var cross_entropy(Var logits, int target);
// Σ_b weight_b · -log softmax(logits_b)[target_b] over the rows of a matrix.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights);

// scores[b,t] = <query[b,:], memory[b,t,:]>
Var batched_dot(Var query, Var memory);
// Row softmax restricted to the first lengths[b] positions; the rest get 0.
Var masked_softmax(Var scores, std::span<const std::size_t> lengths);
// out[b,:] = Σ_t weights[b,t] · memory[b,t,:]
Var weighted_sum(Var weights, Var memory);

}  // namespace msnmt::ag
