#include "uda/variational.hpp"

#include <cmath>

#include "uda/ops.hpp"

namespace uda {

VariationalHeads::VariationalHeads(ParameterStore& store, const std::string& name, int channels,
                                   double logvar_clamp)
    : mu_(store, name + ".mu", channels, channels, 1),
      logvar_(store, name + ".logvar", channels, channels, 1),
      channels_(channels),
      clamp_(logvar_clamp) {}

LatentGaussian VariationalHeads::operator()(const Var& feature, int scale_index) const {
  if (feature.shape().c != channels_) {
    throw DimensionError("variational head expects " + std::to_string(channels_) +
                         " channels, got " + feature.shape().str());
  }
  return LatentGaussian{mu_(feature), ops::clamp(logvar_(feature), -clamp_, clamp_), scale_index};
}

Var reparameterize(const LatentGaussian& g, const Tensor& noise) {
  require_same_shape(g.mu.shape(), g.logvar.shape(), "reparameterize(mu, logvar)");
  require_same_shape(g.mu.shape(), noise.shape(), "reparameterize(noise)");
  Var sigma = ops::exp(ops::scale(g.logvar, 0.5));
  return ops::add(g.mu, ops::mul(sigma, Var(noise)));
}

MultiScaleLatents parallel_reparameterize(const std::array<LatentGaussian, 3>& gaussians,
                                          const std::array<Tensor, 3>& noise) {
  MultiScaleLatents out;
  for (int k = 0; k < 3; ++k) {
    out.gaussians[k] = gaussians[k];
    out.samples[k] = reparameterize(gaussians[k], noise[k]);
  }
  return out;
}

SequentialChain::SequentialChain(ParameterStore& store, const std::string& name,
                                 std::array<int, 3> widths, double logvar_clamp)
    : clamp_(logvar_clamp) {
  for (int k = 0; k < 2; ++k) {
    const std::string tag = name + (k == 0 ? ".mid" : ".fine");
    delta_mu_[k] = nn::Conv2d(store, tag + ".dmu", widths[k], widths[k + 1], 1);
    delta_logvar_[k] = nn::Conv2d(store, tag + ".dlogvar", widths[k], widths[k + 1], 1);
  }
}

MultiScaleLatents SequentialChain::operator()(const std::array<LatentGaussian, 3>& gaussians,
                                              Rng* rng) const {
  std::array<Tensor, 3> noise;
  for (int k = 0; k < 3; ++k) {
    const Shape s = gaussians[k].mu.shape();
    noise[k] = rng ? standard_normal(s, *rng) : Tensor(s, 0.0);
  }
  return run(gaussians, noise);
}

MultiScaleLatents SequentialChain::run(const std::array<LatentGaussian, 3>& gaussians,
                                       const std::array<Tensor, 3>& noise) const {
  for (int k = 1; k < 3; ++k) {
    const Shape lo = gaussians[k - 1].mu.shape();
    const Shape hi = gaussians[k].mu.shape();
    if (hi.h != 2 * lo.h || hi.w != 2 * lo.w || hi.n != lo.n) {
      throw DimensionError("sequential chain: scale " + std::to_string(k + 1) + " " + hi.str() +
                           " is not twice scale " + std::to_string(k) + " " + lo.str());
    }
  }
  MultiScaleLatents out;
  out.gaussians[0] = gaussians[0];
  out.samples[0] = reparameterize(gaussians[0], noise[0]);
  for (int k = 1; k < 3; ++k) {
    Var up = ops::upsample_nearest2(out.samples[k - 1]);
    LatentGaussian g = gaussians[k];
    g.mu = ops::add(g.mu, delta_mu_[k - 1](up));
    g.logvar = ops::clamp(ops::add(g.logvar, delta_logvar_[k - 1](up)), -clamp_, clamp_);
    out.gaussians[k] = g;
    out.samples[k] = reparameterize(g, noise[k]);
  }
  return out;
}

void SequentialChain::zero() {
  for (int k = 0; k < 2; ++k) {
    delta_mu_[k].zero();
    delta_logvar_[k].zero();
  }
}

std::vector<Var> SequentialChain::parameters() const {
  std::vector<Var> out;
  for (int k = 0; k < 2; ++k) {
    out.insert(out.end(), {delta_mu_[k].weight, delta_mu_[k].bias, delta_logvar_[k].weight,
                           delta_logvar_[k].bias});
  }
  return out;
}

}  // namespace uda
