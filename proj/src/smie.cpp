#include "uda/smie.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "uda/image.hpp"
#include "uda/ops.hpp"
#include "uda/optim.hpp"

namespace uda::smie {

namespace {

constexpr double kDiscFloor = 1e-6;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double mi_score(std::span<const double> joint, std::span<const double> product) {
  if (joint.empty() || product.empty()) throw DimensionError("mi_score: empty score set");
  double a = 0.0, b = 0.0;
  for (double t : joint) a -= softplus(-t);
  for (double t : product) b += softplus(t);
  return a / static_cast<double>(joint.size()) - b / static_cast<double>(product.size());
}

Var mi_score(const Var& joint, const Var& product) {
  const double v = mi_score(joint.value().values(), product.value().values());
  return make_node(Tensor::scalar(v), {joint, product}, [](Node& self) {
    const double g = self.grad[0];
    if (self.parents[0]->requires_grad) {
      const Tensor& t = self.parents[0]->value;
      Tensor& gt = self.parents[0]->grad_buffer();
      const double inv = g / static_cast<double>(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) gt[i] += inv * logistic(-t[i]);
    }
    if (self.parents[1]->requires_grad) {
      const Tensor& t = self.parents[1]->value;
      Tensor& gt = self.parents[1]->grad_buffer();
      const double inv = g / static_cast<double>(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) gt[i] -= inv * logistic(t[i]);
    }
  });
}

double prior_score(std::span<const double> normal_logits, std::span<const double> code_logits) {
  if (normal_logits.empty() || code_logits.empty()) throw DimensionError("prior_score: empty input");
  double a = 0.0, b = 0.0;
  for (double l : normal_logits) a += std::log(std::clamp(logistic(l), kDiscFloor, 1.0 - kDiscFloor));
  for (double l : code_logits) b += std::log(1.0 - std::clamp(logistic(l), kDiscFloor, 1.0 - kDiscFloor));
  return a / static_cast<double>(normal_logits.size()) + b / static_cast<double>(code_logits.size());
}

Var prior_score(const Var& normal_logits, const Var& code_logits) {
  const double v = prior_score(normal_logits.value().values(), code_logits.value().values());
  return make_node(Tensor::scalar(v), {normal_logits, code_logits}, [](Node& self) {
    const double g = self.grad[0];
    if (self.parents[0]->requires_grad) {
      const Tensor& l = self.parents[0]->value;
      Tensor& gl = self.parents[0]->grad_buffer();
      const double inv = g / static_cast<double>(l.size());
      for (std::size_t i = 0; i < l.size(); ++i) {
        const double d = logistic(l[i]);
        if (d > kDiscFloor && d < 1.0 - kDiscFloor) gl[i] += inv * (1.0 - d);
      }
    }
    if (self.parents[1]->requires_grad) {
      const Tensor& l = self.parents[1]->value;
      Tensor& gl = self.parents[1]->grad_buffer();
      const double inv = g / static_cast<double>(l.size());
      for (std::size_t i = 0; i < l.size(); ++i) {
        const double d = logistic(l[i]);
        if (d > kDiscFloor && d < 1.0 - kDiscFloor) gl[i] -= inv * d;
      }
    }
  });
}

GlobalScorer::GlobalScorer(ParameterStore& store, const std::string& name, int in_channels,
                           int width)
    : conv_(store, name + ".conv", in_channels, width, 3), out_(store, name + ".fc", width, 1) {}

Var GlobalScorer::operator()(const Var& positive, const Var& other) const {
  Var joint = ops::concat_channels({positive, other});
  return out_(ops::global_avg_pool(ops::relu(conv_(joint))));
}

Var SmieBlock::TwoLayerMlp::operator()(const Var& x) const { return second(ops::relu(first(x))); }

SmieBlock::SmieBlock(ParameterStore& store, const std::string& name, const SmieConfig& config)
    : config_(config) {
  const int f = config.feature_width;
  const int s = config.score_width;
  const int code = config.code_dim;
  anchor_net_ = {nn::Conv2d(store, name + ".anchor.conv1", 1, f, 3),
                 nn::Conv2d(store, name + ".anchor.conv2", f, f, 3)};
  positive_net_ = {nn::Conv2d(store, name + ".positive.conv1", 3 * kNumClasses, f, 3),
                   nn::Conv2d(store, name + ".positive.conv2", f, f, 3),
                   nn::Conv2d(store, name + ".positive.conv3", f, f, 3)};
  global_ = GlobalScorer(store, name + ".global", 2 * f, s);
  local_code_ = {nn::Linear(store, name + ".local.fc1", f, s),
                 nn::Linear(store, name + ".local.fc2", s, code)};
  local_score_ = {nn::Conv2d(store, name + ".local.conv1", f + code, s, 1),
                  nn::Conv2d(store, name + ".local.conv2", s, 1, 1)};
  prior_code_ = {nn::Linear(store, name + ".prior.fc1", f, s),
                 nn::Linear(store, name + ".prior.fc2", s, code)};
  prior_disc_ = {nn::Linear(store, name + ".prior.disc1", code, s),
                 nn::Linear(store, name + ".prior.disc2", s, 1)};
}

ContrastiveTriplet SmieBlock::prepare_triplet(const std::array<Var, 3>& seg_probs,
                                              const Var& recon) const {
  const Shape mid = seg_probs[1].shape();
  Var fused = ops::concat_channels({ops::upsample_nearest2(seg_probs[0]), seg_probs[1],
                                    ops::avg_pool2(seg_probs[2])});
  Var anchor_in = ops::avg_pool2(recon);
  if (anchor_in.shape().h != mid.h || anchor_in.shape().w != mid.w) {
    throw DimensionError("prepare_triplet: reconstruction " + recon.shape().str() +
                         " does not match mid scale " + mid.str());
  }
  ContrastiveTriplet t;
  t.degenerate = recon.shape().n == 1;
  if (t.degenerate) {
    std::clog << "warning: SMIE batch of one; negative equals anchor and carries no contrast\n";
  }
  Var negative_in = ops::roll_batch(anchor_in, 1);
  auto path2 = [this](Var x) {
    for (const auto& c : anchor_net_) x = ops::relu(c(x));
    return x;
  };
  t.anchor = path2(anchor_in);
  t.negative = path2(negative_in);
  Var p = fused;
  for (const auto& c : positive_net_) p = ops::relu(c(p));
  t.positive = p;
  return t;
}

Var SmieBlock::global_estimate(const ContrastiveTriplet& t) const {
  return mi_score(global_(t.positive, t.anchor), global_(t.positive, t.negative));
}

Var SmieBlock::local_estimate(const ContrastiveTriplet& t) const {
  const Shape s = t.positive.shape();
  auto score = [&](const Var& other) {
    Var code = local_code_(ops::global_avg_pool(other));
    Var x = ops::concat_channels({t.positive, ops::broadcast_spatial(code, s.h, s.w)});
    x = local_score_[1](ops::relu(local_score_[0](x)));
    return ops::global_avg_pool(x);
  };
  return mi_score(score(t.anchor), score(t.negative));
}

Var SmieBlock::prior_code(const Var& positive) const {
  return prior_code_(ops::global_avg_pool(positive));
}

Var SmieBlock::prior_estimate(const Var& positive, Rng& rng) const {
  Var code = prior_code(positive);
  Var normal(standard_normal(code.shape(), rng));
  return prior_score(prior_disc_(normal), prior_disc_(ops::gradient_reversal(code)));
}

MIScores<Var> SmieBlock::estimate(const ContrastiveTriplet& t, Rng& rng) const {
  return MIScores<Var>{global_estimate(t), local_estimate(t), prior_estimate(t.positive, rng)};
}

namespace {

std::pair<Tensor, Tensor> correlated_pairs(double rho, int n, Rng& rng) {
  const Tensor u = standard_normal(Shape{n, 1, 1, 1}, rng);
  const Tensor w = standard_normal(Shape{n, 1, 1, 1}, rng);
  Tensor v(u.shape());
  const double c = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < u.size(); ++i) v[i] = rho * u[i] + c * w[i];
  return {u, v};
}

Var harness_score(const GlobalScorer& scorer, const Tensor& u, const Tensor& v) {
  const Var uv(u);
  const Var vv(v);
  return mi_score(scorer(vv, uv), scorer(vv, ops::roll_batch(uv, 1)));
}

}  // namespace

double mi_harness_score(double rho, std::uint64_t seed, const MiHarnessOptions& opts) {
  if (!(std::abs(rho) < 1.0)) throw DimensionError("mi_harness_score: |rho| must be < 1");
  Rng rng(seed);
  ParameterStore store;
  GlobalScorer scorer(store, "harness", 2, opts.width);
  store.xavier_init(rng);
  Adam adam(store);
  for (int step = 0; step < opts.steps; ++step) {
    const auto [u, v] = correlated_pairs(rho, opts.batch, rng);
    store.zero_grad();
    // Maximise the surrogate.
    (-harness_score(scorer, u, v)).backward();
    adam.step(opts.lr);
  }
  NoGradGuard guard;
  const auto [u, v] = correlated_pairs(rho, opts.eval_batch, rng);
  return harness_score(scorer, u, v).item();
}

MiSanityReport run_mi_sanity(std::uint64_t seed, int n_seeds, const MiHarnessOptions& opts) {
  if (n_seeds < 1) throw DimensionError("run_mi_sanity: need at least one seed");
  MiSanityReport r;
  for (std::size_t k = 0; k < r.rhos.size(); ++k) {
    double sum = 0.0;
    for (int s = 0; s < n_seeds; ++s) sum += mi_harness_score(r.rhos[k], seed + static_cast<std::uint64_t>(s), opts);
    r.scores[k] = sum / n_seeds;
  }
  const double base = -2.0 * std::log(2.0);
  r.ordered = r.scores[2] > r.scores[1] && r.scores[1] > r.scores[0];
  r.baseline_in_band = r.scores[0] >= base - 0.05 && r.scores[0] <= base + 0.10;
  return r;
}

}  // namespace uda::smie
