#include "uda/losses.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <numbers>

#include "uda/ops.hpp"

namespace uda::losses {

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

void require_finite(const Tensor& t, const char* what) {
  if (!all_finite(t.values())) throw NumericError(std::string(what) + ": non-finite input");
}

using ArrayMap = Eigen::Map<const Eigen::ArrayXd>;
using MutArrayMap = Eigen::Map<Eigen::ArrayXd>;

// Sum over elements of the product kernel for one ordered pair (a, b).
double pair_kernel_sum(const double* mu_a, const double* var_a, const double* mu_b,
                       const double* var_b, Eigen::Index n) {
  ArrayMap ma(mu_a, n), va(var_a, n), mb(mu_b, n), vb(var_b, n);
  const Eigen::ArrayXd s = va + vb;
  const Eigen::ArrayXd d = ma - mb;
  return kInvSqrt2Pi * (s.rsqrt() * (-0.5 * d.square() / s).exp()).sum();
}

// Returns the pair kernel sum and adds coef times its gradient wrt
// (mu, var) of both sides into the four buffers.
double pair_kernel_fused(const double* mu_a, const double* var_a, const double* mu_b,
                         const double* var_b, Eigen::Index n, double coef, double* gmu_a,
                         double* gvar_a, double* gmu_b, double* gvar_b) {
  constexpr Eigen::Index kBlock = 256;
  using Block = Eigen::Array<double, Eigen::Dynamic, 1, 0, kBlock, 1>;
  Block s, d, inv_s, k, dmu, dvar;
  double sum = 0.0;
  for (Eigen::Index p = 0; p < n; p += kBlock) {
    const Eigen::Index len = std::min(kBlock, n - p);
    s = ArrayMap(var_a + p, len) + ArrayMap(var_b + p, len);
    d = ArrayMap(mu_a + p, len) - ArrayMap(mu_b + p, len);
    inv_s = s.inverse();
    k = kInvSqrt2Pi * inv_s.sqrt() * (-0.5 * d.square() * inv_s).exp();
    sum += k.sum();
    dmu = coef * k * d * inv_s;  // d/dmu_b; d/dmu_a is its negative
    dvar = (0.5 * coef) * k * inv_s * (d.square() * inv_s - 1.0);
    MutArrayMap(gmu_a + p, len) -= dmu;
    MutArrayMap(gmu_b + p, len) += dmu;
    MutArrayMap(gvar_a + p, len) += dvar;
    MutArrayMap(gvar_b + p, len) += dvar;
  }
  return sum;
}

struct MixturePair {
  const Tensor& mu_s;
  const Tensor& var_s;
  const Tensor& mu_t;
  const Tensor& var_t;
};

void check_mixture_shapes(const Shape& mu_s, const Shape& var_s, const Shape& mu_t,
                          const Shape& var_t) {
  require_same_shape(mu_s, var_s, "domain_distance(source mu, var)");
  require_same_shape(mu_t, var_t, "domain_distance(target mu, var)");
  require_same_shape(mu_s, mu_t, "domain_distance(source, target)");
  if (mu_s.n < 1) throw DimensionError("domain_distance: empty batch");
}

double mixture_distance(const MixturePair& p) {
  const int m = p.mu_s.shape().n;
  const Eigen::Index e = static_cast<Eigen::Index>(p.mu_s.size() / m);
  auto at = [e](const Tensor& t, int i) { return t.data() + static_cast<std::size_t>(i) * e; };
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (int i = 0; i < m; ++i) {
    ss += pair_kernel_sum(at(p.mu_s, i), at(p.var_s, i), at(p.mu_s, i), at(p.var_s, i), e);
    tt += pair_kernel_sum(at(p.mu_t, i), at(p.var_t, i), at(p.mu_t, i), at(p.var_t, i), e);
    for (int j = i + 1; j < m; ++j) {
      ss += 2.0 * pair_kernel_sum(at(p.mu_s, i), at(p.var_s, i), at(p.mu_s, j), at(p.var_s, j), e);
      tt += 2.0 * pair_kernel_sum(at(p.mu_t, i), at(p.var_t, i), at(p.mu_t, j), at(p.var_t, j), e);
    }
    for (int j = 0; j < m; ++j) {
      st += pair_kernel_sum(at(p.mu_s, i), at(p.var_s, i), at(p.mu_t, j), at(p.var_t, j), e);
    }
  }
  const double norm = 1.0 / (static_cast<double>(m) * m * static_cast<double>(e));
  return norm * (ss + tt - 2.0 * st);
}

}  // namespace

std::string LossBreakdown::first_non_finite() const {
  const std::pair<const char*, double> fields[] = {
      {"recon_source", recon_source}, {"seg_source", seg_source}, {"mi_source", mi_source},
      {"recon_target", recon_target}, {"seg_target", seg_target}, {"mi_target", mi_target},
      {"domain", domain},             {"total", total}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

double kl_gaussian(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu.shape(), logvar.shape(), "kl_gaussian");
  require_finite(mu, "kl_gaussian(mu)");
  require_finite(logvar, "kl_gaussian(logvar)");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc += 0.5 * (std::exp(logvar[i]) + mu[i] * mu[i] - logvar[i] - 1.0);
  }
  return acc / static_cast<double>(mu.size());
}

double bernoulli_ce(const Tensor& x, const Tensor& r) {
  require_same_shape(x.shape(), r.shape(), "bernoulli_ce");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(r[i] > 0.0 && r[i] < 1.0)) {
      throw NumericError("bernoulli_ce: reconstruction value " + std::to_string(r[i]) +
                         " outside (0, 1)");
    }
    acc -= x[i] * std::log(r[i]) + (1.0 - x[i]) * std::log1p(-r[i]);
  }
  return acc / static_cast<double>(x.size());
}

double seg_ce(const Tensor& one_hot, const Tensor& probs) {
  require_same_shape(one_hot.shape(), probs.shape(), "seg_ce");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (one_hot[i] != 0.0) acc -= one_hot[i] * std::log(std::max(probs[i], kProbabilityFloor));
  }
  const Shape s = probs.shape();
  return acc / (static_cast<double>(s.n) * s.plane());
}

double mean_entropy(const Tensor& probs) {
  double acc = 0.0;
  for (double p : probs.values()) acc -= p * std::log(std::max(p, kProbabilityFloor));
  const Shape s = probs.shape();
  return acc / (static_cast<double>(s.n) * s.plane());
}

double domain_kernel(std::span<const double> mu_s, std::span<const double> var_s,
                     std::span<const double> mu_t, std::span<const double> var_t) {
  const std::size_t n = mu_s.size();
  if (var_s.size() != n || mu_t.size() != n || var_t.size() != n || n == 0) {
    throw DimensionError("domain_kernel: mismatched element counts");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = var_s[i] + var_t[i];
    if (!(s > 0.0)) throw NumericError("domain_kernel: non-positive variance sum");
    const double d = mu_s[i] - mu_t[i];
    acc += kInvSqrt2Pi * std::exp(-0.5 * (d * d / s + std::log(s)));
  }
  return acc / static_cast<double>(n);
}

double domain_distance(const Tensor& mu_s, const Tensor& var_s, const Tensor& mu_t,
                       const Tensor& var_t) {
  check_mixture_shapes(mu_s.shape(), var_s.shape(), mu_t.shape(), var_t.shape());
  return mixture_distance({mu_s, var_s, mu_t, var_t});
}

Var kl_gaussian(const Var& mu, const Var& logvar) {
  const double v = kl_gaussian(mu.value(), logvar.value());
  return make_node(Tensor::scalar(v), {mu, logvar}, [](Node& self) {
    const Tensor& m = self.parents[0]->value;
    const Tensor& lv = self.parents[1]->value;
    const double g = self.grad[0] / static_cast<double>(m.size());
    if (self.parents[0]->requires_grad) {
      Tensor& gm = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < m.size(); ++i) gm[i] += g * m[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& gl = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < lv.size(); ++i) gl[i] += g * 0.5 * (std::exp(lv[i]) - 1.0);
    }
  });
}

Var bernoulli_ce(const Tensor& x, const Var& r) {
  const double v = bernoulli_ce(x, r.value());
  return make_node(Tensor::scalar(v), {r}, [x](Node& self) {
    const Tensor& rv = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    const double scale = self.grad[0] / static_cast<double>(rv.size());
    for (std::size_t i = 0; i < rv.size(); ++i) {
      g[i] += scale * (rv[i] - x[i]) / (rv[i] * (1.0 - rv[i]));
    }
  });
}

Var seg_ce(const Tensor& one_hot, const Var& probs) {
  const double v = seg_ce(one_hot, probs.value());
  return make_node(Tensor::scalar(v), {probs}, [one_hot](Node& self) {
    const Tensor& p = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    const Shape s = p.shape();
    const double scale = self.grad[0] / (static_cast<double>(s.n) * s.plane());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (one_hot[i] != 0.0 && p[i] > kProbabilityFloor) g[i] -= scale * one_hot[i] / p[i];
    }
  });
}

Var mean_entropy(const Var& probs) {
  const double v = mean_entropy(probs.value());
  return make_node(Tensor::scalar(v), {probs}, [](Node& self) {
    const Tensor& p = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    const Shape s = p.shape();
    const double scale = self.grad[0] / (static_cast<double>(s.n) * s.plane());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > kProbabilityFloor) g[i] -= scale * (std::log(p[i]) + 1.0);
    }
  });
}

Var domain_distance(const Var& mu_s, const Var& logvar_s, const Var& mu_t, const Var& logvar_t) {
  check_mixture_shapes(mu_s.shape(), logvar_s.shape(), mu_t.shape(), logvar_t.shape());
  Var var_s = ops::exp(logvar_s);
  Var var_t = ops::exp(logvar_t);
  const Tensor& ms = mu_s.value();
  const Tensor& vs = var_s.value();
  const Tensor& mt = mu_t.value();
  const Tensor& vt = var_t.value();
  const bool needs_grad = grad_enabled() && (mu_s.requires_grad() || var_s.requires_grad() ||
                                             mu_t.requires_grad() || var_t.requires_grad());
  if (!needs_grad) return Var(Tensor::scalar(mixture_distance({ms, vs, mt, vt})), false);

  // Value and gradient in one sweep; the backward pass only rescales.
  const int m = ms.shape().n;
  const Eigen::Index e = static_cast<Eigen::Index>(ms.size() / m);
  const double norm = 1.0 / (static_cast<double>(m) * m * static_cast<double>(e));
  auto grads = std::make_shared<std::array<Tensor, 4>>(std::array<Tensor, 4>{
      Tensor(ms.shape()), Tensor(vs.shape()), Tensor(mt.shape()), Tensor(vt.shape())});
  auto& [gms, gvs, gmt, gvt] = *grads;
  auto off = [e](int i) { return static_cast<std::size_t>(i) * e; };
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double w = i == j ? 1.0 : 2.0;
      ss += w * pair_kernel_fused(ms.data() + off(i), vs.data() + off(i), ms.data() + off(j),
                                  vs.data() + off(j), e, w * norm, gms.data() + off(i),
                                  gvs.data() + off(i), gms.data() + off(j), gvs.data() + off(j));
      tt += w * pair_kernel_fused(mt.data() + off(i), vt.data() + off(i), mt.data() + off(j),
                                  vt.data() + off(j), e, w * norm, gmt.data() + off(i),
                                  gvt.data() + off(i), gmt.data() + off(j), gvt.data() + off(j));
    }
    for (int j = 0; j < m; ++j) {
      st += pair_kernel_fused(ms.data() + off(i), vs.data() + off(i), mt.data() + off(j),
                              vt.data() + off(j), e, -2.0 * norm, gms.data() + off(i),
                              gvs.data() + off(i), gmt.data() + off(j), gvt.data() + off(j));
    }
  }
  const double v = norm * (ss + tt - 2.0 * st);
  return make_node(Tensor::scalar(v), {mu_s, var_s, mu_t, var_t}, [grads](Node& self) {
    const double up = self.grad[0];
    for (std::size_t p = 0; p < 4; ++p) {
      if (!self.parents[p]->requires_grad) continue;
      Tensor& g = self.parents[p]->grad_buffer();
      const Tensor& src = (*grads)[p];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * src[i];
    }
  });
}

Var domain_distance(const MultiScaleLatents& source, const MultiScaleLatents& target) {
  Var total;
  for (int k = 0; k < 3; ++k) {
    Var d = domain_distance(source.gaussians[k].mu, source.gaussians[k].logvar,
                            target.gaussians[k].mu, target.gaussians[k].logvar);
    total = total.defined() ? ops::add(total, d) : d;
  }
  return total;
}

Var kl_sum(const MultiScaleLatents& latents) {
  Var total;
  for (const auto& g : latents.gaussians) {
    Var kl = kl_gaussian(g.mu, g.logvar);
    total = total.defined() ? ops::add(total, kl) : kl;
  }
  return total;
}

Var recon_loss(const Tensor& x, const Var& r, const MultiScaleLatents& latents) {
  return ops::add(bernoulli_ce(x, r), kl_sum(latents));
}

LossBreakdown total_loss(const LossParts<double>& p, const LossWeights& w) {
  for (double v : {p.source.recon, p.source.seg, p.source.mi, p.target.recon, p.target.seg,
                   p.target.mi, p.domain}) {
    if (!std::isfinite(v)) throw NumericError("total_loss: non-finite part");
  }
  LossBreakdown b;
  b.recon_source = p.source.recon;
  b.seg_source = p.source.seg;
  b.mi_source = p.source.mi;
  b.recon_target = p.target.recon;
  b.seg_target = p.target.seg;
  b.mi_target = p.target.mi;
  b.domain = p.domain;
  b.total = weighted_total(p, w);
  return b;
}

Tensor one_hot(const Tensor& labels, int classes) {
  const Shape s = labels.shape();
  if (s.c != 1) throw DimensionError("one_hot: label map must have one channel, got " + s.str());
  Tensor out(Shape{s.n, classes, s.h, s.w}, 0.0);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* src = labels.plane(n, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      const int c = static_cast<int>(src[p]);
      if (c < 0 || c >= classes || static_cast<double>(c) != src[p]) {
        throw DimensionError("one_hot: label " + std::to_string(src[p]) + " out of range");
      }
      out.plane(n, c)[p] = 1.0;
    }
  }
  return out;
}

}  // namespace uda::losses
