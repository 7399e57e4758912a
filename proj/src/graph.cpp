#include "msnmt/graph.hpp"

#include <cmath>
#include <string>

namespace msnmt::ag {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::MatMul: return "matmul";
    case Op::Linear: return "linear";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Sum: return "sum";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
    case Op::Softmax: return "softmax";
    case Op::Lookup: return "lookup";
    case Op::CrossEntropy: return "cross_entropy";
    case Op::BatchedDot: return "batched_dot";
    case Op::MaskedSoftmax: return "masked_softmax";
    case Op::WeightedSum: return "weighted_sum";
  }
  return "unknown";
}

Var Graph::constant(Tensor t) {
  Node n;
  n.op = Op::Constant;
  n.owned = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Tensor t) {
  Node n;
  n.op = Op::Input;
  n.owned = std::move(t);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Tensor& p) {
  Node n;
  n.op = Op::Parameter;
  n.external = &p;
  n.mutable_external = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant_ref(const Tensor& p) {
  Node n;
  n.op = Op::Constant;
  n.external = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(std::size_t id) const {
  const auto& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

std::span<const double> Graph::grad(std::size_t id) const {
  const auto& n = nodes_.at(id);
  if (n.external) return n.external->grad;
  return n.grad;
}

Buffer& Graph::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.mutable_external) {
    n.mutable_external->ensure_grad();
    return n.mutable_external->grad;
  }
  if (n.grad.size() != n.owned.size()) n.grad.assign(n.owned.size(), 0.0);
  return n.grad;
}

Var Graph::record(Op op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  for (double x : value.values) {
    if (!std::isfinite(x))
      throw NumericError("non-finite value produced by " + std::string(op_name(op)));
  }
  Node n;
  n.op = op;
  n.requires_grad = false;
  for (auto id : inputs) n.requires_grad = n.requires_grad || nodes_.at(id).requires_grad;
  n.inputs = std::move(inputs);
  n.owned = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
  const auto root = loss.id();
  if (value(root).size() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(value(root).shape));
  for (auto& n : nodes_) {
    if (!n.external) n.grad.clear();
  }
  if (!nodes_[root].requires_grad) return;
  grad_buffer(root)[0] += 1.0;
  for (std::size_t id = root + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

}  // namespace msnmt::ag
