#include "uda/optim.hpp"

#include <cmath>

namespace uda {

Adam::Adam(const ParameterStore& store, AdamOptions opts) : opts_(opts) {
  for (const auto& [_, p] : store.entries()) {
    slots_.push_back(Slot{p, Tensor(p.shape(), 0.0), Tensor(p.shape(), 0.0), false});
  }
}

void Adam::freeze(const Var& param) {
  for (auto& s : slots_) {
    if (s.param.node() == param.node()) s.frozen = true;
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    if (s.frozen) continue;
    Tensor& w = s.param.mutable_value();
    const Tensor& g = s.param.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = opts_.beta1 * s.m[i] + (1.0 - opts_.beta1) * g[i];
      s.v[i] = opts_.beta2 * s.v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

}  // namespace uda
