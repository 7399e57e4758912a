#pragma once

#include <cstddef>
#include <iosfwd>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "msnmt/errors.hpp"

namespace msnmt {

using Shape = std::vector<std::size_t>;

// Cache-line aligned storage. Eigen picks its vectorized code path from the
// address alignment, so identical computations only round identically when
// every buffer starts on the same boundary.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. An empty grad means "no gradient".
struct Tensor {
  Shape shape;
  Buffer values;
  Buffer grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, Buffer v);

  static Tensor vector(Buffer v);
  static Tensor matrix(std::size_t rows, std::size_t cols, Buffer v);
  static Tensor identity(std::size_t n);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  double& at(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();
  void zero_grad();
};

// Binary layout: u64 rank, u64 dims..., f64 values..., all little-endian.
void save_tensor(std::ostream& out, const Tensor& t);
Tensor load_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace msnmt
