#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "uda/losses.hpp"
#include "uda/nn.hpp"

namespace uda::smie {

/// Jensen-Shannon flavoured MI surrogate
/// E[-sp(-T_joint)] - E[sp(T_product)], sp(z) = log(1 + e^z).
double mi_score(std::span<const double> joint_scores, std::span<const double> product_scores);
Var mi_score(const Var& joint_scores, const Var& product_scores);

/// Prior-matching score E[log d(n)] + E[log(1 - d(c))] from discriminator
/// logits, with d = sigmoid(logit) clamped to [1e-6, 1 - 1e-6].
double prior_score(std::span<const double> normal_logits, std::span<const double> code_logits);
Var prior_score(const Var& normal_logits, const Var& code_logits);

/// Anchor (processed reconstruction), positive (processed segmentation) and
/// negative (processed batch-shifted reconstruction), all at H/2.
struct ContrastiveTriplet {
  Var anchor;
  Var positive;
  Var negative;
  bool degenerate = false;  // batch of one: the negative equals the anchor
};

template <typename T>
struct MIScores {
  T global{};
  T local{};
  T prior{};
};

/// L_MI = -(alpha global + beta local + gamma prior).
template <typename T>
T smie_loss(const MIScores<T>& s, const losses::LossWeights& w) {
  return -1.0 * (w.alpha * s.global + w.beta * s.local + w.gamma * s.prior);
}

struct SmieConfig {
  int feature_width = 32;  // anchor/negative/positive paths (2C)
  int score_width = 16;    // scoring heads (C)
  int code_dim = 16;       // local code and prior code
};

/// Conv 3x3 -> ReLU -> global average pool -> linear to one score per sample.
class GlobalScorer {
 public:
  GlobalScorer() = default;
  GlobalScorer(ParameterStore& store, const std::string& name, int in_channels, int width);

  /// Scores concat(positive, other) per sample, shape (n, 1, 1, 1).
  Var operator()(const Var& positive, const Var& other) const;

 private:
  nn::Conv2d conv_;
  nn::Linear out_;
};

class SmieBlock {
 public:
  SmieBlock() = default;
  SmieBlock(ParameterStore& store, const std::string& name, const SmieConfig& config);

  /// seg_probs are coarse, mid, fine class probabilities; recon is the
  /// full-resolution reconstruction. The negative is the anchor input
  /// circularly shifted by one sample.
  ContrastiveTriplet prepare_triplet(const std::array<Var, 3>& seg_probs, const Var& recon) const;

  Var global_estimate(const ContrastiveTriplet& t) const;
  Var local_estimate(const ContrastiveTriplet& t) const;
  /// The code path sees a reversed gradient so that minimising L_MI trains
  /// the discriminator while pushing codes toward the standard normal.
  Var prior_estimate(const Var& positive, Rng& rng) const;
  /// Prior code c for the given positive features (no gradient reversal).
  Var prior_code(const Var& positive) const;

  MIScores<Var> estimate(const ContrastiveTriplet& t, Rng& rng) const;

 private:
  struct TwoLayerMlp {
    nn::Linear first;
    nn::Linear second;
    Var operator()(const Var& x) const;
  };

  SmieConfig config_;
  std::array<nn::Conv2d, 2> anchor_net_;
  std::array<nn::Conv2d, 3> positive_net_;
  GlobalScorer global_;
  TwoLayerMlp local_code_;
  std::array<nn::Conv2d, 2> local_score_;
  TwoLayerMlp prior_code_;
  TwoLayerMlp prior_disc_;
};

struct MiHarnessOptions {
  int steps = 2000;
  int batch = 128;
  int width = 32;
  double lr = 1e-3;
  int eval_batch = 8192;
};

/// Trains a GlobalScorer on (u, v) pairs with v = rho u + sqrt(1 - rho^2) w,
/// u, w standard normal, negatives pairing v with u shifted by one sample.
/// Returns the mi_score of the trained scorer on a fresh batch.
double mi_harness_score(double rho, std::uint64_t seed, const MiHarnessOptions& opts = {});

struct MiSanityReport {
  std::array<double, 3> rhos{0.0, 0.5, 0.9};
  std::array<double, 3> scores{};  // averaged over seeds
  bool ordered = false;            // strictly increasing in rho
  bool baseline_in_band = false;   // rho = 0 score within [-2 ln 2 - 0.05, -2 ln 2 + 0.10]
};

MiSanityReport run_mi_sanity(std::uint64_t seed, int n_seeds = 3, const MiHarnessOptions& opts = {});

}  // namespace uda::smie
