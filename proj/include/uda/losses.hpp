#pragma once

#include <span>
#include <string>
#include <vector>

#include "uda/autograd.hpp"
#include "uda/variational.hpp"

namespace uda::losses {

/// Weights of the total objective. Defaults are the reference values; the
/// target segmentation weight is zero because the target domain is unlabeled.
struct LossWeights {
  double c1 = 1e-2;  // reconstruction
  double c2 = 1.0;   // source segmentation
  double c2_target = 0.0;
  double c3 = 1e-1;  // structure mutual information
  double c4 = 1e-5;  // latent domain discrepancy
  double alpha = 0.5;  // global MI
  double beta = 1.0;   // local MI
  double gamma = 0.1;  // prior matching
};

inline constexpr double kProbabilityFloor = 1e-7;

/// Per-domain terms of the objective.
template <typename T>
struct DomainTerms {
  T recon{};
  T seg{};
  T mi{};
};

template <typename T>
struct LossParts {
  DomainTerms<T> source;
  DomainTerms<T> target;
  T domain{};
};

/// Named scalar record of one step.
struct LossBreakdown {
  double recon_source = 0.0;
  double seg_source = 0.0;
  double mi_source = 0.0;
  double recon_target = 0.0;
  double seg_target = 0.0;
  double mi_target = 0.0;
  double domain = 0.0;
  double total = 0.0;

  /// Name of the first non-finite field, or empty if all are finite.
  std::string first_non_finite() const;
};

// -- closed forms on plain arrays ------------------------------------------

/// Mean over elements of 0.5 (sigma^2 + mu^2 - log sigma^2 - 1).
double kl_gaussian(const Tensor& mu, const Tensor& logvar);

/// Mean of -(x log R + (1 - x) log(1 - R)). R must lie strictly inside (0, 1).
double bernoulli_ce(const Tensor& x, const Tensor& r);

/// Mean per-pixel categorical cross-entropy with probabilities floored at 1e-7.
double seg_ce(const Tensor& one_hot, const Tensor& probs);

/// Mean over elements of the Gaussian product kernel
/// (2 pi)^-1/2 exp(-0.5 [(mu_s - mu_t)^2 / (v_s + v_t) + log(v_s + v_t)]).
double domain_kernel(std::span<const double> mu_s, std::span<const double> var_s,
                     std::span<const double> mu_t, std::span<const double> var_t);

/// Squared L2 distance between the batch mixtures of source and target
/// Gaussians via the kernel sum. Arrays are (M, ...) with variances, not
/// log-variances.
double domain_distance(const Tensor& mu_s, const Tensor& var_s, const Tensor& mu_t,
                       const Tensor& var_t);

/// Mean per-pixel entropy of a probability map; used as the optional
/// label-free target segmentation term.
double mean_entropy(const Tensor& probs);

// -- differentiable versions -----------------------------------------------

Var kl_gaussian(const Var& mu, const Var& logvar);
Var bernoulli_ce(const Tensor& x, const Var& r);
Var seg_ce(const Tensor& one_hot, const Var& probs);
Var mean_entropy(const Var& probs);

/// Domain distance at one scale, parameterised by log-variances.
Var domain_distance(const Var& mu_s, const Var& logvar_s, const Var& mu_t, const Var& logvar_t);

/// Sum of the per-scale domain distances over the three latent scales.
Var domain_distance(const MultiScaleLatents& source, const MultiScaleLatents& target);

/// Sum over scales of kl_gaussian on the given Gaussians.
Var kl_sum(const MultiScaleLatents& latents);

/// bernoulli_ce(x, R) + kl_sum(latents).
Var recon_loss(const Tensor& x, const Var& r, const MultiScaleLatents& latents);

/// Weighted objective. total = sum over domains of c1 recon + c2 seg + c3 mi
/// (with c2_target for the target) plus c4 domain.
template <typename T>
T weighted_total(const LossParts<T>& p, const LossWeights& w) {
  return w.c1 * p.source.recon + w.c2 * p.source.seg + w.c3 * p.source.mi +
         w.c1 * p.target.recon + w.c2_target * p.target.seg + w.c3 * p.target.mi +
         w.c4 * p.domain;
}

LossBreakdown total_loss(const LossParts<double>& parts, const LossWeights& w);

/// Label map (n, 1, h, w) with integer classes -> one-hot (n, classes, h, w).
Tensor one_hot(const Tensor& labels, int classes);

}  // namespace uda::losses
