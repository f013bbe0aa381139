#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uda/nn.hpp"

namespace uda::oracle {

struct Gaussian1D {
  double mu = 0.0;
  double var = 1.0;
};

/// Adaptive Gauss-Kronrod quadrature of KL(N(mu, var) || N(0, 1)).
double quad_kl_to_std_normal(double mu, double var);

/// Quadrature of the integral of (q_S(z) - q_T(z))^2, q_D the equal-weight
/// mixture of the listed 1-D Gaussians.
double quad_l2_mixture_distance(const std::vector<Gaussian1D>& source,
                                const std::vector<Gaussian1D>& target);

/// Mutual information of a bivariate normal with correlation rho.
double analytic_gaussian_mi(double rho);

/// Joint probability table over (x, y, z), row-major with z fastest.
class DiscreteJoint {
 public:
  DiscreteJoint(int nx, int ny, int nz, std::vector<double> table);

  /// Strictly positive random table (entries uniform in (0, 1], normalised).
  static DiscreteJoint random(int nx, int ny, int nz, Rng& rng);
  /// q(x, y) q(z): z independent of (x, y), from arbitrary positive marginals.
  static DiscreteJoint independent(const std::vector<double>& pxy, int nx, int ny,
                                   const std::vector<double>& pz);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double operator()(int x, int y, int z) const { return table_[index(x, y, z)]; }
  double marginal_xy(int x, int y) const;
  double marginal_z(int z) const;

 private:
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * ny_ + y) * nz_ + z;
  }
  int nx_, ny_, nz_;
  std::vector<double> table_;
};

/// Every quantity of the lower-bound chain by exact summation, in nats.
/// Conditional-side terms are expectations over q(x, y).
struct BoundReport {
  double lhs = 0.0;        // E_q(x,y) KL(q(z|x,y) || p(z|x,y))
  double rhs_mid = 0.0;    // KL(q_xyz || p_xyz) + E_q(x,y) log p(x,y)/q(x,y)
  double rhs_low = 0.0;    // R + I_q(x,y;z) - H_q(z) + E_q(x,y) log p(x,y)/q(x,y)
  double recon_error = 0.0;  // R
  double entropy_z = 0.0;    // H_q(z)
  double entropy_xy = 0.0;   // H_q(x,y)
  double mutual_info = 0.0;  // I_q(x,y;z)
  double log_ratio = 0.0;    // E_q(x,y) log p(x,y)/q(x,y)
  double joint_kl = 0.0;     // KL(q_xyz || p_xyz)
  /// rhs_low with H_q(x,y) in place of H_q(z); diagnostic only.
  double rhs_low_data_entropy = 0.0;

  double margin_mid() const { return lhs - rhs_mid; }
  double margin_low() const { return rhs_mid - rhs_low; }
  double margin_low_data_entropy() const { return rhs_mid - rhs_low_data_entropy; }
  bool holds(double tol = 1e-9) const { return margin_mid() >= -tol && margin_low() >= -tol; }
};

/// Throws NumericError unless both tables are strictly positive and share
/// their supports.
BoundReport brute_force_bound_check(const DiscreteJoint& q, const DiscreteJoint& p);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at the worst coordinate
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates next to a kink

  /// Error within tol and at most one coordinate in twenty skipped.
  bool ok(double tol) const { return max_rel_error < tol && skipped * 20 <= checked + skipped; }
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Fourth-order central differences of f at x along the listed coordinates (all when
/// empty) against the analytic gradient. With kink_tol > 0 a coordinate whose
/// central differences at eps and 2 eps disagree by more than kink_tol (relative)
/// is skipped.
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> x, std::span<const double> analytic, double eps,
                           double floor, const std::vector<std::size_t>& coords = {},
                           double kink_tol = 0.0);

/// Same for a graph built by `loss` from parameter leaves: analytic
/// gradients by one backward pass, numeric ones by perturbing the leaf
/// values in place. `loss` must be deterministic.
GradCheckResult grad_check_vars(const std::function<Var()>& loss, const std::vector<Var>& leaves,
                                double eps, double floor, std::size_t max_coords, Rng& rng,
                                double kink_tol = 0.0);

struct NamedGradCheck {
  std::string name;
  GradCheckResult result;
};

/// Tolerances of the suite. The network total uses a narrower stencil and
/// skips coordinates where it straddles a ReLU or max-pool kink.
inline constexpr double kGradCheckTolerance = 1e-5;
inline constexpr double kGradCheckEps = 1e-4;
inline constexpr double kGradCheckFloor = 1e-6;
inline constexpr double kNetworkGradCheckEps = 1e-5;
inline constexpr double kNetworkGradCheckFloor = 1e-4;
inline constexpr double kNetworkKinkTolerance = kGradCheckTolerance;

/// Each loss term on random inputs plus L_total on a tiny model (8 x 8,
/// two samples per domain, two U-Net levels).
std::vector<NamedGradCheck> grad_check_suite(std::uint64_t seed);

}  // namespace uda::oracle
