#include "uda/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "uda/ops.hpp"

namespace uda {

Tensor standard_normal(Shape shape, Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Var ParameterStore::create(const std::string& name, Shape shape) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
  Var v(Tensor(shape, 0.0), true);
  index_[name] = params_.size();
  params_.emplace_back(name, v);
  return v;
}

Var ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return params_[it->second].second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

void ParameterStore::xavier_init(Rng& rng) {
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto& [name, v] : params_) {
    Tensor& t = v.mutable_value();
    if (ends_with(name, ".weight")) {
      const Shape s = t.shape();
      const double receptive = static_cast<double>(s.h) * s.w;
      const double fan_in = s.c * receptive;
      const double fan_out = s.n * receptive;
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (auto& x : t.values()) x = dist(rng);
    } else {
      t.fill(0.0);
    }
  }
}

namespace nn {

Conv2d::Conv2d(ParameterStore& store, const std::string& name, int in, int out, int kernel)
    : weight(store.create(name + ".weight", Shape{out, in, kernel, kernel})),
      bias(store.create(name + ".bias", Shape{1, out, 1, 1})) {}

Var Conv2d::operator()(const Var& x) const { return ops::conv2d(x, weight, bias); }

void Conv2d::zero() {
  weight.mutable_value().fill(0.0);
  bias.mutable_value().fill(0.0);
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out)
    : weight(store.create(name + ".weight", Shape{out, in, 1, 1})),
      bias(store.create(name + ".bias", Shape{1, out, 1, 1})) {}

Var Linear::operator()(const Var& x) const { return ops::linear(x, weight, bias); }

}  // namespace nn
}  // namespace uda
