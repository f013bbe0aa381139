#pragma once

#include <array>

#include "uda/nn.hpp"

namespace uda {

/// Diagonal Gaussian posterior at one latent scale. logvar is log(sigma^2).
struct LatentGaussian {
  Var mu;
  Var logvar;
  int scale_index = 0;  // 1 = coarse, 2 = mid, 3 = fine
};

/// Coarse-to-fine Gaussians (after any sequential correction) and the
/// samples drawn from them.
struct MultiScaleLatents {
  std::array<LatentGaussian, 3> gaussians;
  std::array<Var, 3> samples;
};

inline constexpr double kDefaultLogvarClamp = 10.0;

/// Two parallel 1x1 convolutions producing mu and logvar with the feature's
/// channel width. logvar is clamped to [-clamp, clamp].
class VariationalHeads {
 public:
  VariationalHeads() = default;
  VariationalHeads(ParameterStore& store, const std::string& name, int channels,
                   double logvar_clamp = kDefaultLogvarClamp);

  LatentGaussian operator()(const Var& feature, int scale_index) const;

 private:
  nn::Conv2d mu_;
  nn::Conv2d logvar_;
  int channels_ = 0;
  double clamp_ = kDefaultLogvarClamp;
};

/// z = mu + exp(logvar / 2) * noise.
Var reparameterize(const LatentGaussian& g, const Tensor& noise);

/// Independent per-scale sampling, the baseline the chain reduces to.
MultiScaleLatents parallel_reparameterize(const std::array<LatentGaussian, 3>& gaussians,
                                          const std::array<Tensor, 3>& noise);

/// Sequential reparameterization: z_{k-1} is upsampled 2x (nearest) and a
/// 1x1 convolution emits (dmu, dlogvar) that correct the scale-k Gaussian
/// before z_k is drawn.
class SequentialChain {
 public:
  SequentialChain() = default;
  /// widths are the channel counts of the coarse, mid and fine scales.
  SequentialChain(ParameterStore& store, const std::string& name, std::array<int, 3> widths,
                  double logvar_clamp = kDefaultLogvarClamp);

  /// Draw noise for each scale from rng in coarse-to-fine order. A null rng
  /// means zero noise (posterior means).
  MultiScaleLatents operator()(const std::array<LatentGaussian, 3>& gaussians, Rng* rng) const;

  MultiScaleLatents run(const std::array<LatentGaussian, 3>& gaussians,
                        const std::array<Tensor, 3>& noise) const;

  /// Zero every correction weight (the chain then equals parallel sampling).
  void zero();

  /// Correction parameters, for freezing in ablations.
  std::vector<Var> parameters() const;

 private:
  std::array<nn::Conv2d, 2> delta_mu_;
  std::array<nn::Conv2d, 2> delta_logvar_;
  double clamp_ = kDefaultLogvarClamp;
};

}  // namespace uda
