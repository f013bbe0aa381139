#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uda/errors.hpp"

namespace uda {

/// NCHW extents. Vectors are stored as (n, c, 1, 1), scalars as (1, 1, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Allocator whose value-less construct leaves doubles uninitialised.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

/// Dense rank-4 array of doubles in NCHW order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, const std::vector<double>& values);

  /// Contents unspecified; for outputs that are written in full.
  static Tensor uninitialized(Shape shape);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// Pointer to the (h, w) plane of sample n, channel c.
  double* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const double* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  /// Copy of samples [first, first + count).
  Tensor slice_batch(int first, int count) const;

  void fill(double v);
  double item() const;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<double, DefaultInitAllocator<double>> data_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

bool all_finite(std::span<const double> v);

/// Stack single-sample tensors (n == 1) along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);

}  // namespace uda
