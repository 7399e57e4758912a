#include "msnmt/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace msnmt::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

CMapMat cmat(const Buffer& v, std::size_t r, std::size_t c) {
  return CMapMat(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MapMat mmat(Buffer& v, std::size_t r, std::size_t c) {
  return MapMat(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Graph& same_graph(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.graph() != b.graph())
    throw ContractError("operands belong to different graphs");
  return *a.graph();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void accumulate(Buffer& dst, const Buffer& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Rows × columns view of a tensor whose last axis is the "column" axis.
std::pair<std::size_t, std::size_t> as_rows(const Shape& s) {
  if (s.empty()) return {1, 1};
  const std::size_t cols = s.back();
  return {cols == 0 ? 0 : shape_size(s) / cols, cols};
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul: incompatible shapes " + shape_string(sa) + " and " +
                     shape_string(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  mmat(out.values, m, n).noalias() = cmat(a.value().values, m, k) * cmat(b.value().values, k, n);
  const auto ia = a.id(), ib = b.id();
  return g.record(Op::MatMul, {ia, ib}, std::move(out), [=](Graph& gr, std::size_t self) {
    auto dc = cmat(gr.output_grad(self), m, n);
    if (gr.requires_grad(ia)) {
      auto da = mmat(gr.grad_buffer(ia), m, k);
      da.noalias() += dc * cmat(gr.value(ib).values, k, n).transpose();
    }
    if (gr.requires_grad(ib)) {
      auto db = mmat(gr.grad_buffer(ib), k, n);
      db.noalias() += cmat(gr.value(ia).values, m, k).transpose() * dc;
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  Graph& g = same_graph(x, weight);
  const auto& sx = x.shape();
  const auto& sw = weight.shape();
  if (sw.size() != 2 || sx.empty() || sx.size() > 2 || sx.back() != sw[1])
    throw ShapeError("linear: incompatible shapes " + shape_string(sx) + " and weight " +
                     shape_string(sw));
  const std::size_t rows = sx.size() == 2 ? sx[0] : 1;
  const std::size_t in = sw[1], outd = sw[0];
  const bool has_bias = bias.valid();
  if (has_bias) {
    same_graph(x, bias);
    if (bias.shape() != Shape{outd})
      throw ShapeError("linear: bias shape " + shape_string(bias.shape()) + " expected [" +
                       std::to_string(outd) + "]");
  }
  Tensor out(sx.size() == 2 ? Shape{rows, outd} : Shape{outd});
  auto y = mmat(out.values, rows, outd);
  y.noalias() = cmat(x.value().values, rows, in) * cmat(weight.value().values, outd, in).transpose();
  if (has_bias)
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().values.data(),
                                                       static_cast<Eigen::Index>(outd));
  const auto ix = x.id(), iw = weight.id();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<std::size_t> inputs{ix, iw};
  if (has_bias) inputs.push_back(ib);
  return g.record(Op::Linear, std::move(inputs), std::move(out), [=](Graph& gr, std::size_t self) {
    auto dy = cmat(gr.output_grad(self), rows, outd);
    if (gr.requires_grad(ix)) {
      auto dx = mmat(gr.grad_buffer(ix), rows, in);
      dx.noalias() += dy * cmat(gr.value(iw).values, outd, in);
    }
    if (gr.requires_grad(iw)) {
      auto dw = mmat(gr.grad_buffer(iw), outd, in);
      dw.noalias() += dy.transpose() * cmat(gr.value(ix).values, rows, in);
    }
    if (has_bias && gr.requires_grad(ib)) {
      auto db = mmat(gr.grad_buffer(ib), 1, outd);
      db += dy.colwise().sum();
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  const auto& va = a.value().values;
  const auto& vb = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = va[i] + vb[i];
  const auto ia = a.id(), ib = b.id();
  return g.record(Op::Add, {ia, ib}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    if (gr.requires_grad(ia)) accumulate(gr.grad_buffer(ia), dy);
    if (gr.requires_grad(ib)) accumulate(gr.grad_buffer(ib), dy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  const auto& va = a.value().values;
  const auto& vb = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = va[i] - vb[i];
  const auto ia = a.id(), ib = b.id();
  return g.record(Op::Sub, {ia, ib}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    if (gr.requires_grad(ia)) accumulate(gr.grad_buffer(ia), dy);
    if (gr.requires_grad(ib)) {
      auto& d = gr.grad_buffer(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  const auto& va = a.value().values;
  const auto& vb = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = va[i] * vb[i];
  const auto ia = a.id(), ib = b.id();
  return g.record(Op::Mul, {ia, ib}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    if (gr.requires_grad(ia)) {
      auto& d = gr.grad_buffer(ia);
      const auto& other = gr.value(ib).values;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * other[i];
    }
    if (gr.requires_grad(ib)) {
      auto& d = gr.grad_buffer(ib);
      const auto& other = gr.value(ia).values;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * other[i];
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = *a.graph();
  Tensor out(a.shape());
  const auto& va = a.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = factor * va[i];
  const auto ia = a.id();
  return g.record(Op::Scale, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    auto& d = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * dy[i];
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph();
  Tensor out(a.shape());
  const auto& va = a.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = std::tanh(va[i]);
  const auto ia = a.id();
  return g.record(Op::Tanh, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    const auto& y = gr.value(self).values;
    auto& d = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Graph& g = *a.graph();
  Tensor out(a.shape());
  const auto& va = a.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = stable_sigmoid(va[i]);
  const auto ia = a.id();
  return g.record(Op::Sigmoid, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    const auto& y = gr.value(self).values;
    auto& d = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double x : a.value().values) s += x;
  Tensor out(Shape{}, Buffer{s});
  const auto ia = a.id();
  return g.record(Op::Sum, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const double dy = gr.output_grad(self)[0];
    for (auto& d : gr.grad_buffer(ia)) d += dy;
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  Graph& g = *parts[0].graph();
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(first));
  // Each part is viewed as [outer, chunk] where chunk covers axis and beyond.
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::vector<std::size_t> chunks;
  std::vector<std::size_t> ids;
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    same_graph(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok)
      throw ShapeError("concat: incompatible shapes " + shape_string(first) + " and " +
                       shape_string(s) + " along axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
    chunks.push_back(outer == 0 ? 0 : shape_size(s) / outer);
    ids.push_back(p.id());
  }
  Tensor out(out_shape);
  std::size_t total_chunk = 0;
  for (auto c : chunks) total_chunk += c;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value().values;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.begin() + o * chunks[k], chunks[k],
                  out.values.begin() + o * total_chunk + offset);
    offset += chunks[k];
  }
  return g.record(Op::Concat, ids, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.requires_grad(ids[k])) {
        auto& d = gr.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < chunks[k]; ++j)
            d[o * chunks[k] + j] += dy[o * total_chunk + off + j];
      }
      off += chunks[k];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Graph& g = *a.graph();
  const Shape& s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis])
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + shape_string(s));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t src_chunk = s[axis] * inner;
  const std::size_t dst_chunk = (end - begin) * inner;
  const std::size_t start = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const auto& v = a.value().values;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(v.begin() + o * src_chunk + start, dst_chunk, out.values.begin() + o * dst_chunk);
  const auto ia = a.id();
  return g.record(Op::Slice, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    auto& d = gr.grad_buffer(ia);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < dst_chunk; ++j) d[o * src_chunk + start + j] += dy[o * dst_chunk + j];
  });
}

std::vector<Var> split(Var a, std::size_t axis, std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (axis >= a.shape().size() || total != a.shape()[axis])
    throw ShapeError("split: sizes do not cover axis of " + shape_string(a.shape()));
  std::vector<Var> out;
  std::size_t begin = 0;
  for (auto s : sizes) {
    out.push_back(slice(a, axis, begin, begin + s));
    begin += s;
  }
  return out;
}

Var reshape(Var a, Shape shape) {
  Graph& g = *a.graph();
  if (shape_size(shape) != a.value().size())
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  Tensor out(std::move(shape), a.value().values);
  const auto ia = a.id();
  return g.record(Op::Reshape, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    accumulate(gr.grad_buffer(ia), gr.output_grad(self));
  });
}

Var softmax(Var a) {
  Graph& g = *a.graph();
  const Shape& s = a.shape();
  if (s.empty() || s.size() > 2 || s.back() == 0)
    throw ShapeError("softmax: expected a non-empty vector or matrix, got " + shape_string(s));
  const auto [rows, cols] = as_rows(s);
  Tensor out(s);
  const auto& v = a.value().values;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * cols;
    double* y = out.values.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
  const auto ia = a.id();
  return g.record(Op::Softmax, {ia}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    const auto& y = gr.value(self).values;
    auto& d = gr.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += dy[r * cols + j] * y[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        d[r * cols + j] += y[r * cols + j] * (dy[r * cols + j] - dot);
    }
  });
}

namespace {

Var lookup_rows(Var table, std::vector<int> ids, Shape out_shape) {
  Graph& g = *table.graph();
  const Shape& s = table.shape();
  if (s.size() != 2) throw ShapeError("lookup: table must be a matrix, got " + shape_string(s));
  const std::size_t vocab = s[0], d = s[1];
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw IndexError("lookup: index " + std::to_string(id) + " outside [0," +
                       std::to_string(vocab) + ")");
  }
  Tensor out(std::move(out_shape));
  const auto& v = table.value().values;
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(v.begin() + static_cast<std::size_t>(ids[r]) * d, d, out.values.begin() + r * d);
  const auto it = table.id();
  return g.record(Op::Lookup, {it}, std::move(out),
                  [=, ids = std::move(ids)](Graph& gr, std::size_t self) {
                    const auto& dy = gr.output_grad(self);
                    auto& dt = gr.grad_buffer(it);
                    for (std::size_t r = 0; r < ids.size(); ++r) {
                      const std::size_t base = static_cast<std::size_t>(ids[r]) * d;
                      for (std::size_t j = 0; j < d; ++j) dt[base + j] += dy[r * d + j];
                    }
                  });
}

Var cross_entropy_rows(Var logits, std::vector<int> targets, std::vector<double> weights,
                       std::size_t rows, std::size_t vocab) {
  Graph& g = *logits.graph();
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab)
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0," +
                       std::to_string(vocab) + ")");
  }
  const auto& x = logits.value().values;
  Buffer probs(rows * vocab);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * vocab;
    double* pr = probs.data() + r * vocab;
    const double mx = *std::max_element(xr, xr + vocab);
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) z += (pr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < vocab; ++j) pr[j] /= z;
    if (weights[r] != 0.0) {
      const double logp = xr[targets[r]] - mx - std::log(z);
      loss -= weights[r] * logp;
    }
  }
  Tensor out(Shape{}, Buffer{loss});
  const auto il = logits.id();
  return g.record(Op::CrossEntropy, {il}, std::move(out),
                  [=, probs = std::move(probs), targets = std::move(targets),
                   weights = std::move(weights)](Graph& gr, std::size_t self) {
                    const double dy = gr.output_grad(self)[0];
                    auto& d = gr.grad_buffer(il);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double w = weights[r] * dy;
                      if (w == 0.0) continue;
                      for (std::size_t j = 0; j < vocab; ++j) d[r * vocab + j] += w * probs[r * vocab + j];
                      d[r * vocab + static_cast<std::size_t>(targets[r])] -= w;
                    }
                  });
}

}  // namespace

Var lookup(Var table, int index) {
  const std::size_t d = table.shape().size() == 2 ? table.shape()[1] : 0;
  return lookup_rows(table, {index}, Shape{d});
}

Var lookup(Var table, std::span<const int> ids) {
  const std::size_t d = table.shape().size() == 2 ? table.shape()[1] : 0;
  return lookup_rows(table, std::vector<int>(ids.begin(), ids.end()), Shape{ids.size(), d});
}

Var cross_entropy(Var logits, int target) {
  const Shape& s = logits.shape();
  if (s.size() != 1 || s[0] == 0)
    throw ShapeError("cross_entropy: expected non-empty logits vector, got " + shape_string(s));
  return cross_entropy_rows(logits, {target}, {1.0}, 1, s[0]);
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] == 0 || targets.size() != s[0] || weights.size() != s[0])
    throw ShapeError("cross_entropy: logits " + shape_string(s) + " vs " +
                     std::to_string(targets.size()) + " targets / " +
                     std::to_string(weights.size()) + " weights");
  return cross_entropy_rows(logits, std::vector<int>(targets.begin(), targets.end()),
                            std::vector<double>(weights.begin(), weights.end()), s[0], s[1]);
}

Var batched_dot(Var query, Var memory) {
  Graph& g = same_graph(query, memory);
  const Shape& sq = query.shape();
  const Shape& sm = memory.shape();
  if (sq.size() != 2 || sm.size() != 3 || sq[0] != sm[0] || sq[1] != sm[2])
    throw ShapeError("batched_dot: query " + shape_string(sq) + " vs memory " + shape_string(sm));
  const std::size_t batch = sm[0], steps = sm[1], d = sm[2];
  Tensor out(Shape{batch, steps});
  const auto& q = query.value().values;
  const auto& m = memory.value().values;
  for (std::size_t b = 0; b < batch; ++b) {
    CMapVec qb(q.data() + b * d, static_cast<Eigen::Index>(d));
    auto mb = CMapMat(m.data() + b * steps * d, static_cast<Eigen::Index>(steps),
                      static_cast<Eigen::Index>(d));
    MapVec(out.values.data() + b * steps, static_cast<Eigen::Index>(steps)).noalias() = mb * qb;
  }
  const auto iq = query.id(), im = memory.id();
  return g.record(Op::BatchedDot, {iq, im}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    const auto& qv = gr.value(iq).values;
    const auto& mv = gr.value(im).values;
    for (std::size_t b = 0; b < batch; ++b) {
      CMapVec dyb(dy.data() + b * steps, static_cast<Eigen::Index>(steps));
      if (gr.requires_grad(iq)) {
        auto mb = CMapMat(mv.data() + b * steps * d, static_cast<Eigen::Index>(steps),
                          static_cast<Eigen::Index>(d));
        MapVec(gr.grad_buffer(iq).data() + b * d, static_cast<Eigen::Index>(d)).noalias() +=
            mb.transpose() * dyb;
      }
      if (gr.requires_grad(im)) {
        CMapVec qb(qv.data() + b * d, static_cast<Eigen::Index>(d));
        auto dmb = MapMat(gr.grad_buffer(im).data() + b * steps * d,
                          static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(d));
        dmb.noalias() += dyb * qb.transpose();
      }
    }
  });
}

Var masked_softmax(Var scores, std::span<const std::size_t> lengths) {
  Graph& g = *scores.graph();
  const Shape& s = scores.shape();
  if (s.size() != 2 || lengths.size() != s[0])
    throw ShapeError("masked_softmax: scores " + shape_string(s) + " with " +
                     std::to_string(lengths.size()) + " lengths");
  const std::size_t rows = s[0], cols = s[1];
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  for (auto len : lens) {
    if (len == 0 || len > cols)
      throw ContractError("masked_softmax: length " + std::to_string(len) + " outside [1," +
                          std::to_string(cols) + "]");
  }
  Tensor out(s);
  const auto& v = scores.value().values;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * cols;
    double* y = out.values.data() + r * cols;
    const double mx = *std::max_element(x, x + lens[r]);
    double z = 0.0;
    for (std::size_t j = 0; j < lens[r]; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < lens[r]; ++j) y[j] /= z;
  }
  const auto is = scores.id();
  return g.record(Op::MaskedSoftmax, {is}, std::move(out),
                  [=, lens = std::move(lens)](Graph& gr, std::size_t self) {
                    const auto& dy = gr.output_grad(self);
                    const auto& y = gr.value(self).values;
                    auto& d = gr.grad_buffer(is);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < lens[r]; ++j) dot += dy[r * cols + j] * y[r * cols + j];
                      for (std::size_t j = 0; j < lens[r]; ++j)
                        d[r * cols + j] += y[r * cols + j] * (dy[r * cols + j] - dot);
                    }
                  });
}

Var weighted_sum(Var weights, Var memory) {
  Graph& g = same_graph(weights, memory);
  const Shape& sw = weights.shape();
  const Shape& sm = memory.shape();
  if (sw.size() != 2 || sm.size() != 3 || sw[0] != sm[0] || sw[1] != sm[1])
    throw ShapeError("weighted_sum: weights " + shape_string(sw) + " vs memory " +
                     shape_string(sm));
  const std::size_t batch = sm[0], steps = sm[1], d = sm[2];
  Tensor out(Shape{batch, d});
  const auto& w = weights.value().values;
  const auto& m = memory.value().values;
  for (std::size_t b = 0; b < batch; ++b) {
    CMapVec wb(w.data() + b * steps, static_cast<Eigen::Index>(steps));
    auto mb = CMapMat(m.data() + b * steps * d, static_cast<Eigen::Index>(steps),
                      static_cast<Eigen::Index>(d));
    MapVec(out.values.data() + b * d, static_cast<Eigen::Index>(d)).noalias() = mb.transpose() * wb;
  }
  const auto iw = weights.id(), im = memory.id();
  return g.record(Op::WeightedSum, {iw, im}, std::move(out), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.output_grad(self);
    const auto& wv = gr.value(iw).values;
    const auto& mv = gr.value(im).values;
    for (std::size_t b = 0; b < batch; ++b) {
      CMapVec dyb(dy.data() + b * d, static_cast<Eigen::Index>(d));
      if (gr.requires_grad(iw)) {
        auto mb = CMapMat(mv.data() + b * steps * d, static_cast<Eigen::Index>(steps),
                          static_cast<Eigen::Index>(d));
        MapVec(gr.grad_buffer(iw).data() + b * steps, static_cast<Eigen::Index>(steps)).noalias() +=
            mb * dyb;
      }
      if (gr.requires_grad(im)) {
        CMapVec wb(wv.data() + b * steps, static_cast<Eigen::Index>(steps));
        auto dmb = MapMat(gr.grad_buffer(im).data() + b * steps * d,
                          static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(d));
        dmb.noalias() += wb * dyb.transpose();
      }
    }
  });
}

}  // namespace msnmt::ag
