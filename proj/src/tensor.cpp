#include "uda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace uda {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError("negative extent in shape " + shape.str());
  }
}

Tensor::Tensor(Shape shape, const std::vector<double>& values)
    : shape_(shape), data_(values.begin(), values.end()) {
  if (data_.size() != shape.size()) {
    throw DimensionError("value count " + std::to_string(data_.size()) +
                         " does not match shape " + shape.str());
  }
}

Tensor Tensor::uninitialized(Shape shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw DimensionError("negative extent in shape " + shape.str());
  }
  Tensor t;
  t.shape_ = shape;
  t.data_.resize(shape.size());
  return t;
}

Tensor Tensor::slice_batch(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) {
    throw DimensionError("batch slice out of range for " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  Tensor out(s);
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * per), count * per,
              out.data_.begin());
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on non-scalar tensor " + shape_.str());
  }
  return data_[0];
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) {
    throw DimensionError("stack_batch of zero tensors");
  }
  Shape s = items.front().shape();
  for (const auto& t : items) {
    if (t.shape().n != 1 || t.shape().c != s.c || t.shape().h != s.h || t.shape().w != s.w) {
      throw DimensionError("stack_batch: incompatible item " + t.shape().str());
    }
  }
  s.n = static_cast<int>(items.size());
  Tensor out(s);
  const std::size_t per = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::copy_n(items[i].data(), per, out.data() + i * per);
  }
  return out;
}

}  // namespace uda
