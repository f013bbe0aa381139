#include "uda/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "uda/errors.hpp"
#include "uda/losses.hpp"
#include "uda/ops.hpp"
#include "uda/smie.hpp"
#include "uda/trainer.hpp"

namespace uda::oracle {

namespace {

using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
constexpr unsigned kMaxDepth = 15;
constexpr double kQuadTol = 1e-10;

double integrate_pieces(const std::function<double(double)>& f, std::vector<double> cuts) {
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += Quad::integrate(f, cuts[i], cuts[i + 1], kMaxDepth, kQuadTol);
  }
  return total;
}

double normal_pdf(double z, double mu, double var) {
  const double d = z - mu;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double mixture_pdf(double z, const std::vector<Gaussian1D>& comps) {
  double s = 0.0;
  for (const auto& g : comps) s += normal_pdf(z, g.mu, g.var);
  return s / static_cast<double>(comps.size());
}

}  // namespace

double quad_kl_to_std_normal(double mu, double var) {
  if (!(var > 0.0) || !std::isfinite(mu)) throw NumericError("quad_kl_to_std_normal: bad parameters");
  const double sd = std::sqrt(var);
  auto f = [&](double z) {
    const double log_q = -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (z - mu) * (z - mu) / var;
    const double log_p = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
    return std::exp(log_q) * (log_q - log_p);
  };
  return integrate_pieces(f, {mu - 40.0 * sd, mu - 6.0 * sd, mu, mu + 6.0 * sd, mu + 40.0 * sd});
}

double quad_l2_mixture_distance(const std::vector<Gaussian1D>& source,
                                const std::vector<Gaussian1D>& target) {
  if (source.empty() || target.empty()) throw DimensionError("quad_l2_mixture_distance: empty mixture");
  std::vector<double> cuts;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* list : {&source, &target}) {
    for (const auto& g : *list) {
      if (!(g.var > 0.0)) throw NumericError("quad_l2_mixture_distance: non-positive variance");
      const double sd = std::sqrt(g.var);
      lo = std::min(lo, g.mu - 20.0 * sd);
      hi = std::max(hi, g.mu + 20.0 * sd);
      for (double k : {-4.0, -1.0, 0.0, 1.0, 4.0}) cuts.push_back(g.mu + k * sd);
    }
  }
  cuts.push_back(lo);
  cuts.push_back(hi);
  auto f = [&](double z) {
    const double d = mixture_pdf(z, source) - mixture_pdf(z, target);
    return d * d;
  };
  return integrate_pieces(f, cuts);
}

double analytic_gaussian_mi(double rho) {
  if (!(std::abs(rho) < 1.0)) throw NumericError("analytic_gaussian_mi: |rho| must be < 1");
  return -0.5 * std::log1p(-rho * rho);
}

DiscreteJoint::DiscreteJoint(int nx, int ny, int nz, std::vector<double> table)
    : nx_(nx), ny_(ny), nz_(nz), table_(std::move(table)) {
  if (nx < 1 || ny < 1 || nz < 1 || table_.size() != std::size_t(nx) * ny * nz) {
    throw DimensionError("DiscreteJoint: table size does not match support");
  }
  double total = 0.0;
  for (double v : table_) {
    if (!(v >= 0.0)) throw NumericError("DiscreteJoint: negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw NumericError("DiscreteJoint: table does not sum to 1");
}

DiscreteJoint DiscreteJoint::random(int nx, int ny, int nz, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(std::size_t(nx) * ny * nz);
  for (auto& v : t) v = 1.0 - u(rng);
  const double s = std::accumulate(t.begin(), t.end(), 0.0);
  for (auto& v : t) v /= s;
  return DiscreteJoint(nx, ny, nz, std::move(t));
}

DiscreteJoint DiscreteJoint::independent(const std::vector<double>& pxy, int nx, int ny,
                                         const std::vector<double>& pz) {
  const double sxy = std::accumulate(pxy.begin(), pxy.end(), 0.0);
  const double sz = std::accumulate(pz.begin(), pz.end(), 0.0);
  const int nz = static_cast<int>(pz.size());
  if (pxy.size() != std::size_t(nx) * ny) throw DimensionError("DiscreteJoint::independent: pxy size");
  std::vector<double> t(std::size_t(nx) * ny * nz);
  for (std::size_t i = 0; i < pxy.size(); ++i) {
    for (int z = 0; z < nz; ++z) t[i * nz + z] = (pxy[i] / sxy) * (pz[z] / sz);
  }
  return DiscreteJoint(nx, ny, nz, std::move(t));
}

double DiscreteJoint::marginal_xy(int x, int y) const {
  double s = 0.0;
  for (int z = 0; z < nz_; ++z) s += (*this)(x, y, z);
  return s;
}

double DiscreteJoint::marginal_z(int z) const {
  double s = 0.0;
  for (int x = 0; x < nx_; ++x) {
    for (int y = 0; y < ny_; ++y) s += (*this)(x, y, z);
  }
  return s;
}

BoundReport brute_force_bound_check(const DiscreteJoint& q, const DiscreteJoint& p) {
  if (q.nx() != p.nx() || q.ny() != p.ny() || q.nz() != p.nz()) {
    throw DimensionError("brute_force_bound_check: supports differ");
  }
  for (int x = 0; x < q.nx(); ++x) {
    for (int y = 0; y < q.ny(); ++y) {
      for (int z = 0; z < q.nz(); ++z) {
        if (!(q(x, y, z) > 0.0) || !(p(x, y, z) > 0.0)) {
          throw NumericError("brute_force_bound_check: zero probability cell");
        }
      }
    }
  }
  BoundReport r;
  std::vector<double> qz(q.nz()), pz(p.nz());
  for (int z = 0; z < q.nz(); ++z) {
    qz[z] = q.marginal_z(z);
    pz[z] = p.marginal_z(z);
    r.entropy_z -= qz[z] * std::log(qz[z]);
  }
  double entropy_xyz = 0.0;
  for (int x = 0; x < q.nx(); ++x) {
    for (int y = 0; y < q.ny(); ++y) {
      const double qxy = q.marginal_xy(x, y);
      const double pxy = p.marginal_xy(x, y);
      r.entropy_xy -= qxy * std::log(qxy);
      r.log_ratio += qxy * std::log(pxy / qxy);
      double cond_kl = 0.0;
      for (int z = 0; z < q.nz(); ++z) {
        const double qv = q(x, y, z);
        const double pv = p(x, y, z);
        const double q_cond = qv / qxy;
        const double p_cond = pv / pxy;
        cond_kl += q_cond * std::log(q_cond / p_cond);
        r.joint_kl += qv * std::log(qv / pv);
        entropy_xyz -= qv * std::log(qv);
        r.mutual_info += qv * std::log(qv / (qxy * qz[z]));
      }
      r.lhs += qxy * cond_kl;
    }
  }
  double cross_z = 0.0;  // E_q(z) log p(z)
  for (int z = 0; z < q.nz(); ++z) cross_z += qz[z] * std::log(pz[z]);
  r.recon_error = r.joint_kl + entropy_xyz + cross_z;
  r.rhs_mid = r.joint_kl + r.log_ratio;
  r.rhs_low = r.recon_error + r.mutual_info - r.entropy_z + r.log_ratio;
  r.rhs_low_data_entropy = r.recon_error + r.mutual_info - r.entropy_xy + r.log_ratio;
  return r;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> x, std::span<const double> analytic, double eps,
                           double floor, const std::vector<std::size_t>& coords,
                           double kink_tol) {
  if (analytic.size() != x.size()) throw DimensionError("grad_check: gradient size differs from x");
  std::vector<std::size_t> idx = coords;
  if (idx.empty()) {
    idx.resize(x.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  std::vector<double> probe(x.begin(), x.end());
  GradCheckResult out;
  for (std::size_t i : idx) {
    const double x0 = probe.at(i);
    auto at = [&](double offset) {
      probe[i] = x0 + offset;
      return f(probe);
    };
    const double f1 = at(eps), fm1 = at(-eps), f2 = at(2.0 * eps), fm2 = at(-2.0 * eps);
    probe[i] = x0;
    const double narrow = (f1 - fm1) / (2.0 * eps);
    const double wide = (f2 - fm2) / (4.0 * eps);
    if (kink_tol > 0.0 && relative_error(narrow, wide, floor) > kink_tol) {
      ++out.skipped;
      continue;
    }
    const double numeric = (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * eps);
    const double err = relative_error(analytic[i], numeric, floor);
    if (out.checked == 0 || err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst_index = i;
      out.analytic = analytic[i];
      out.numeric = numeric;
    }
    ++out.checked;
  }
  return out;
}

GradCheckResult grad_check_vars(const std::function<Var()>& loss, const std::vector<Var>& leaves,
                                double eps, double floor, std::size_t max_coords, Rng& rng,
                                double kink_tol) {
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (leaf, element)
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    for (std::size_t e = 0; e < leaves[l].value().size(); ++e) slots.emplace_back(l, e);
  }
  if (slots.size() > max_coords) {
    std::vector<std::pair<std::size_t, std::size_t>> picked;
    std::sample(slots.begin(), slots.end(), std::back_inserter(picked), max_coords, rng);
    slots = std::move(picked);
  }
  std::vector<Var> handles = leaves;
  for (auto& v : handles) v.zero_grad();
  loss().backward();
  std::vector<double> x, g;
  for (auto [l, e] : slots) {
    x.push_back(handles[l].value()[e]);
    g.push_back(handles[l].grad()[e]);
  }
  auto f = [&](std::span<const double> probe) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      handles[slots[i].first].mutable_value()[slots[i].second] = probe[i];
    }
    NoGradGuard guard;
    return loss().item();
  };
  GradCheckResult r = grad_check(f, x, g, eps, floor, {}, kink_tol);
  f(x);  // restore
  return r;
}

namespace {

Var random_leaf(Shape s, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = u(rng);
  return Var(std::move(t), true);
}

Tensor random_one_hot(Shape s, Rng& rng) {
  std::uniform_int_distribution<int> cls(0, s.c - 1);
  Tensor t(s, 0.0);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < s.plane(); ++p) t.plane(n, cls(rng))[p] = 1.0;
  }
  return t;
}

}  // namespace

std::vector<NamedGradCheck> grad_check_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NamedGradCheck> out;
  constexpr std::size_t kMaxCoords = 500;
  auto run = [&](const std::string& name, const std::function<Var()>& loss,
                 const std::vector<Var>& leaves, double eps = kGradCheckEps,
                 double floor = kGradCheckFloor, double kink_tol = 0.0) {
    out.push_back({name, grad_check_vars(loss, leaves, eps, floor, kMaxCoords, rng, kink_tol)});
  };

  {
    Var mu = random_leaf({2, 3, 4, 4}, rng, -2.0, 2.0);
    Var lv = random_leaf({2, 3, 4, 4}, rng, -2.0, 2.0);
    run("kl_gaussian", [=] { return losses::kl_gaussian(mu, lv); }, {mu, lv});
  }
  {
    Tensor x = random_leaf({2, 1, 4, 4}, rng, 0.0, 1.0).value();
    Var r = random_leaf({2, 1, 4, 4}, rng, 0.05, 0.95);
    run("bernoulli_ce", [=] { return losses::bernoulli_ce(x, r); }, {r});
  }
  {
    Tensor y = random_one_hot({2, 4, 4, 4}, rng);
    Var p = random_leaf({2, 4, 4, 4}, rng, 0.05, 1.0);
    run("seg_ce", [=] { return losses::seg_ce(y, p); }, {p});
  }
  {
    Var logits = random_leaf({2, 4, 4, 4}, rng, -2.0, 2.0);
    run("mean_entropy", [=] { return losses::mean_entropy(ops::softmax_channels(logits)); }, {logits});
  }
  {
    Var ms = random_leaf({3, 2, 2, 2}, rng, -1.5, 1.5);
    Var ls = random_leaf({3, 2, 2, 2}, rng, -1.0, 1.0);
    Var mt = random_leaf({3, 2, 2, 2}, rng, -1.5, 1.5);
    Var lt = random_leaf({3, 2, 2, 2}, rng, -1.0, 1.0);
    run("domain_distance", [=] { return losses::domain_distance(ms, ls, mt, lt); }, {ms, ls, mt, lt});
  }
  {
    Var joint = random_leaf({6, 1, 1, 1}, rng, -3.0, 3.0);
    Var product = random_leaf({6, 1, 1, 1}, rng, -3.0, 3.0);
    run("mi_score", [=] { return smie::mi_score(joint, product); }, {joint, product});
  }
  {
    Var normal = random_leaf({6, 1, 1, 1}, rng, -3.0, 3.0);
    Var code = random_leaf({6, 1, 1, 1}, rng, -3.0, 3.0);
    run("prior_score", [=] { return smie::prior_score(normal, code); }, {normal, code});
  }
  {
    TrainConfig cfg;
    cfg.model.backbone.base_channels = 2;
    cfg.model.backbone.levels = 2;
    cfg.model.backbone.recon_width = 2;
    cfg.model.smie_width = 4;
    UdaModel model(cfg.model);
    model.initialize(rng);
    // Zero biases put ReLU inputs exactly on the kink wherever the layer
    // input vanishes.
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    std::vector<Var> leaves;
    for (const auto& [name, v] : model.parameters().entries()) {
      if (name.ends_with(".bias")) {
        Var b = v;
        for (auto& x : b.mutable_value().values()) x = bias(rng);
      }
      leaves.push_back(v);
    }
    Batch source, target;
    Tensor src_img = random_leaf({2, 1, 8, 8}, rng, 0.0, 1.0).value();
    Tensor tgt_img = random_leaf({2, 1, 8, 8}, rng, 0.0, 1.0).value();
    DomainDataset ds;
    for (int n = 0; n < 2; ++n) {
      DomainSample s;
      s.image = Image2D(8, 8);
      std::copy_n(src_img.plane(n, 0), 64, s.image.pixels.begin());
      LabelMap m(8, 8);
      std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
      for (auto& l : m.labels) l = static_cast<std::uint8_t>(cls(rng));
      s.mask = m;
      ds.samples.push_back(s);
    }
    source = make_batch(ds, {0, 1}, true);
    target.images = tgt_img;
    const std::uint64_t noise_seed = rng();
    auto total = [&, noise_seed] {
      ops::ReversalBypass bypass;
      Rng noise(noise_seed);
      return compute_loss(model, source, &target, cfg.weights, noise).total;
    };
    run("total_loss", total, leaves, kNetworkGradCheckEps, kNetworkGradCheckFloor,
        kNetworkKinkTolerance);
  }
  return out;
}

}  // namespace uda::oracle
