#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "msnmt/tensor.hpp"

namespace msnmt::ag {

enum class Op {
  Constant,
  Input,
  Parameter,
  MatMul,
  Linear,
  Add,
  Sub,
  Mul,
  Scale,
  Tanh,
  Sigmoid,
  Sum,
  Concat,
  Slice,
  Reshape,
  Softmax,
  Lookup,
  CrossEntropy,
  BatchedDot,
  MaskedSoftmax,
  WeightedSum,
};

std::string_view op_name(Op op);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::span<const double> grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run tape. Nodes are appended in evaluation order, so every
// input precedes its consumer and backward simply walks the tape in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  // Differentiable leaf owned by the graph.
  Var input(Tensor t);
  // Leaf aliasing an external tensor; backward accumulates into p.grad.
  Var parameter(Tensor& p);
  // Non-differentiable leaf aliasing an external tensor (read-only use).
  Var constant_ref(const Tensor& p);

  // Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are
  // reset first; parameter gradients accumulate.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  std::span<const double> grad(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }
  Op op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  // Used by operation implementations.
  Var record(Op op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Buffer& grad_buffer(std::size_t id);
  const Buffer& output_grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor* mutable_external = nullptr;
    Buffer grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }
inline std::span<const double> Var::grad() const { return graph_->grad(id_); }

}  // namespace msnmt::ag
