// Acceptance checks. `uda_acceptance N` runs criterion N, `uda_acceptance all`
// runs every criterion. Each prints one PASS/FAIL line; the exit code is zero
// iff all requested criteria passed.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "../common/brute_force_metrics.hpp"
#include "uda/cli.hpp"
#include "uda/config.hpp"
#include "uda/losses.hpp"
#include "uda/metrics.hpp"
#include "uda/oracle.hpp"
#include "uda/smie.hpp"
#include "uda/trainer.hpp"
#include "uda/variational.hpp"

namespace {

using namespace uda;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kKlTol = 1e-6;
constexpr double kKlBudget = 5.0;
constexpr double kDomainTol = 1e-6;
constexpr double kDomainBudget = 30.0;
constexpr double kMarginTol = 1e-9;
constexpr double kBoundBudget = 60.0;
constexpr double kGradTol = oracle::kGradCheckTolerance;
constexpr double kGradBudget = 120.0;
constexpr double kMiBudget = 300.0;
constexpr double kUdaMargin = 5.0;
constexpr double kUdaBudget = 1800.0;
constexpr double kMetricsTol = 1e-9;
constexpr double kMetricsBudget = 10.0;
constexpr int kUdaSeeds = 3;
constexpr int kDeterminismEpochs = 3;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(UDA_CONFIG_DIR) / name;
}

Outcome kl_vs_quadrature() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), var(0.05, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double m = mu(rng), v = var(rng);
    const double closed = losses::kl_gaussian(Tensor::scalar(m), Tensor::scalar(std::log(v)));
    worst = std::max(worst, std::abs(closed - oracle::quad_kl_to_std_normal(m, v)));
  }
  const double t = seconds_since(t0);
  return {worst < kKlTol && t < kKlBudget,
          "KL closed form vs quadrature, 100 instances: max abs error " + fmt(worst) + " (tol " +
              fmt(kKlTol) + "), " + fmt(t) + " s (budget " + fmt(kKlBudget) + ")"};
}

Outcome domain_vs_quadrature() {
  const auto t0 = Clock::now();
  Rng rng(102);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), var(0.05, 5.0);
  const int sizes[3] = {1, 2, 4};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int m = sizes[i % 3];
    std::vector<oracle::Gaussian1D> s(m), g(m);
    Tensor ms({m, 1, 1, 1}), vs({m, 1, 1, 1}), mt({m, 1, 1, 1}), vt({m, 1, 1, 1});
    for (int k = 0; k < m; ++k) {
      s[k] = {mu(rng), var(rng)};
      g[k] = {mu(rng), var(rng)};
      ms[k] = s[k].mu, vs[k] = s[k].var, mt[k] = g[k].mu, vt[k] = g[k].var;
    }
    const double closed = losses::domain_distance(ms, vs, mt, vt);
    worst = std::max(worst, std::abs(closed - oracle::quad_l2_mixture_distance(s, g)));
  }
  const double t = seconds_since(t0);
  return {worst < kDomainTol && t < kDomainBudget,
          "domain distance vs mixture quadrature, 50 instances, M in {1,2,4}: max abs error " +
              fmt(worst) + " (tol " + fmt(kDomainTol) + "), " + fmt(t) + " s (budget " +
              fmt(kDomainBudget) + ")"};
}

Outcome bound_check() {
  const auto t0 = Clock::now();
  Rng rng(103);
  int both = 0, mid = 0;
  double worst_mid = INFINITY, worst_low = INFINITY;
  for (int i = 0; i < 200; ++i) {
    const auto q = oracle::DiscreteJoint::random(3, 3, 3, rng);
    const auto p = oracle::DiscreteJoint::random(3, 3, 3, rng);
    const auto b = oracle::brute_force_bound_check(q, p);
    worst_mid = std::min(worst_mid, b.margin_mid());
    worst_low = std::min(worst_low, b.margin_low());
    mid += b.margin_mid() >= -kMarginTol;
    both += b.holds(kMarginTol);
  }
  const double t = seconds_since(t0);
  return {both == 200 && t < kBoundBudget,
          "bound chain on 200 random 3x3x3 instances: " + std::to_string(both) +
              "/200 with both margins >= -1e-9 (first step " + std::to_string(mid) +
              "/200, worst " + fmt(worst_mid) + "; second step worst " + fmt(worst_low) + "), " +
              fmt(t) + " s"};
}

Outcome grad_checks() {
  const auto t0 = Clock::now();
  const auto suite = oracle::grad_check_suite(104);
  bool ok = true;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : suite) {
    ok = ok && c.result.ok(kGradTol);
    if (c.result.max_rel_error >= worst) worst = c.result.max_rel_error, worst_name = c.name;
  }
  const double t = seconds_since(t0);
  return {ok && t < kGradBudget,
          std::to_string(suite.size()) + " gradient checks in double precision: max relative error " +
              fmt(worst) + " (" + worst_name + ", tol " + fmt(kGradTol) + "), " + fmt(t) +
              " s (budget " + fmt(kGradBudget) + ")"};
}

Outcome mi_ordering() {
  const auto t0 = Clock::now();
  const auto r = smie::run_mi_sanity(105, 3);
  const double t = seconds_since(t0);
  return {r.ordered && r.baseline_in_band && t < kMiBudget,
          "MI estimator after 2000 steps, 3 seeds: scores " + fmt(r.scores[0], 4) + ", " +
              fmt(r.scores[1], 4) + ", " + fmt(r.scores[2], 4) + " for rho 0, 0.5, 0.9 (ordered " +
              (r.ordered ? "yes" : "no") + ", rho=0 in band " + (r.baseline_in_band ? "yes" : "no") +
              "), " + fmt(t) + " s (budget " + fmt(kMiBudget) + ")"};
}

Outcome chain_superset() {
  Rng rng(106);
  const std::array<int, 3> widths{16, 8, 4};
  ParameterStore store;
  SequentialChain chain(store, "chain", widths);
  store.xavier_init(rng);
  chain.zero();
  std::array<LatentGaussian, 3> g;
  std::array<Tensor, 3> noise;
  for (int k = 0; k < 3; ++k) {
    const int side = 16 >> (2 - k);
    const Shape s{4, widths[k], side, side};
    g[k] = {Var(standard_normal(s, rng)), Var(standard_normal(s, rng)), k + 1};
    noise[k] = standard_normal(s, rng);
  }
  const auto seq = chain.run(g, noise);
  const auto par = parallel_reparameterize(g, noise);
  std::size_t mismatches = 0, total = 0;
  for (int k = 0; k < 3; ++k) {
    const auto a = seq.samples[k].value().values();
    const auto b = par.samples[k].value().values();
    for (std::size_t i = 0; i < a.size(); ++i) mismatches += a[i] != b[i];
    total += a.size();
  }
  return {mismatches == 0, "zeroed chain vs parallel reparameterization: " +
                               std::to_string(mismatches) + " of " + std::to_string(total) +
                               " elements differ (exact comparison)"};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Outcome uda_efficacy() {
  const auto t0 = Clock::now();
  const std::pair<const char*, const char*> presets[3] = {{"full", "acceptance_full.cfg"},
                                                          {"noadapt", "acceptance_noadapt.cfg"},
                                                          {"c3zero", "acceptance_c3zero.cfg"}};
  std::map<std::string, std::vector<double>> dice;
  for (const auto& [name, file] : presets) {
    auto config = load_config(config_path(file));
    const auto data = load_data(config);
    for (int seed = 0; seed < kUdaSeeds; ++seed) {
      config.seed = static_cast<std::uint64_t>(seed);
      const auto run = train(config, data);
      const double d = run.log.evals.back().dataset == "target_test"
                           ? run.log.evals.back().report.mean_dice
                           : evaluate(*run.model, data.target_test, config.spacing).mean_dice;
      dice[name].push_back(d);
      std::cout << "  " << name << " seed " << seed << ": target Dice " << fmt(d, 4) << " ("
                << fmt(seconds_since(t0), 4) << " s elapsed)" << std::endl;
    }
  }
  const double full = mean(dice["full"]), noadapt = mean(dice["noadapt"]), c3zero = mean(dice["c3zero"]);
  const double t = seconds_since(t0);
  const bool pass = full - noadapt >= kUdaMargin && full >= c3zero && t < kUdaBudget;
  return {pass, "phantom A->B, 3 seeds, mean target Dice: full " + fmt(full, 4) + ", NoAdapt " +
                    fmt(noadapt, 4) + " (need >= +" + fmt(kUdaMargin) + "), c3=0 " + fmt(c3zero, 4) +
                    " (need <= full), " + fmt(t, 4) + " s (budget " + fmt(kUdaBudget, 4) + ")"};
}

Outcome metrics_oracle() {
  const auto t0 = Clock::now();
  Rng rng(108);
  std::uniform_int_distribution<int> side(2, 16), label(0, 3);
  double worst_dice = 0.0, worst_assd = 0.0;
  int assd_compared = 0;
  for (int i = 0; i < 50; ++i) {
    const int h = side(rng), w = side(rng);
    LabelMap p(h, w), g(h, w);
    for (auto& v : p.labels) v = static_cast<std::uint8_t>(label(rng));
    for (auto& v : g.labels) v = static_cast<std::uint8_t>(label(rng));
    for (int c = 1; c < 4; ++c) {
      worst_dice = std::max(worst_dice, std::abs(metrics::dice(p, g, c).percent - test::brute_dice(p, g, c)));
      const auto a = metrics::assd(p, g, c);
      if (p.count(c) == 0 || g.count(c) == 0) {
        if (a) worst_dice = INFINITY;  // must be undefined
        continue;
      }
      worst_assd = std::max(worst_assd, std::abs(*a - test::brute_assd(p, g, c)));
      ++assd_compared;
    }
  }
  const double t = seconds_since(t0);
  return {worst_dice < kMetricsTol && worst_assd < kMetricsTol && t < kMetricsBudget,
          "Dice/ASSD vs brute force on 50 random mask pairs (" + std::to_string(assd_compared) +
              " ASSD values): max error Dice " + fmt(worst_dice) + ", ASSD " + fmt(worst_assd) +
              " (tol " + fmt(kMetricsTol) + "), " + fmt(t) + " s"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "uda_acceptance_determinism";
  std::filesystem::remove_all(root);
  const std::string cfg = config_path("acceptance_full.cfg").string();
  const std::string epochs = "epochs=" + std::to_string(kDeterminismEpochs);
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string();
    const char* argv[] = {"uda", "train", "--config", cfg.c_str(), "--out", out.c_str(),
                          "--set", epochs.c_str(), "--quiet"};
    std::ostringstream sink, err;
    if (run_cli(9, argv, sink, err) != 0) return {false, "train failed: " + err.str()};
  }
  const std::string a = slurp(root / "a" / "runlog.csv"), b = slurp(root / "b" / "runlog.csv");
  const std::string ma = slurp(root / "a" / "metrics.csv"), mb = slurp(root / "b" / "metrics.csv");
  const auto rows = std::count(a.begin(), a.end(), '\n');
  return {!a.empty() && a == b && ma == mb,
          "two `train` runs of the acceptance preset (" + std::to_string(kDeterminismEpochs) +
              " epochs): runlog.csv " + (a == b ? "identical" : "differs") + " (" +
              std::to_string(rows) + " lines), metrics.csv " + (ma == mb ? "identical" : "differs")};
}

const std::vector<std::function<Outcome()>> kCriteria = {
    kl_vs_quadrature, domain_vs_quadrature, bound_check, grad_checks,  mi_ordering,
    chain_superset,   uda_efficacy,         metrics_oracle, determinism};

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  const std::string which = argc > 1 ? argv[1] : "all";
  std::vector<int> run;
  if (which == "all") {
    for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) run.push_back(i);
  } else {
    const int n = std::atoi(which.c_str());
    if (n < 1 || n > static_cast<int>(kCriteria.size())) {
      std::cerr << "usage: uda_acceptance [1-" << kCriteria.size() << " | all]\n";
      return 2;
    }
    run.push_back(n);
  }
  bool all = true;
  for (int n : run) {
    Outcome o{false, ""};
    try {
      o = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
