#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlab/barrier.hpp"
#include "stlab/nonlinearity.hpp"
#include "stlab/ode.hpp"

namespace stlab {

/// How the singular solution is seeded near the origin.
enum class PatchMethod {
  /// u = F^{-1}(r^2 / (2N - 4)), r u' = -r^2 f(u) / (N - 2).
  Asymptotic,
  /// u = F^{-1}(r^2 / (2N - 4 kappa(u))) with kappa = f'F solved as a fixed
  /// point; exact for pure powers and pure exponentials.
  KappaCorrected,
  /// KappaCorrected seed placed `pre_decades` decades further in and
  /// integrated out to r_patch, so the seed error has decayed by
  /// 10^{-pre_decades (N-2)/2} at r_patch.
  Refined,
};

std::string to_string(PatchMethod m);
PatchMethod patch_method_from_string(const std::string& name);

struct SingularOptions {
  double r_patch = 1e-3;
  double R_max = 10.0;
  PatchMethod patch = PatchMethod::Refined;
  double pre_decades = 6.0;
  ode::Tolerances tol{1e-13, 1e-13};
  double patch_tol = 1e-5;
  /// Output density, uniform in log r.
  int samples_per_decade = 4000;
  /// Re-seed at r_patch / 2 and compare downstream; PatchMismatch on failure.
  bool check_patch = true;
  BarrierOptions barrier{};
};

/// State (u, r u') at radius r.
struct PatchSeed {
  double r = 0.0;
  double u = 0.0;
  double v = 0.0;
  double kappa = 1.0;
};

/// Seed on the singular branch at radius r. Throws OutOfRange if the
/// kappa-corrected denominator 2N - 4 kappa is not positive.
PatchSeed patch_seed(const Nonlinearity& spec, int dim, double r, PatchMethod method,
                     const SingularOptions& opts = {});

/// Value of the asymptotic patch (kappa-corrected unless `method` is
/// Asymptotic) at radius r.
double patch_value(const Nonlinearity& spec, int dim, double r, PatchMethod method,
                   const BarrierOptions& barrier = {});

/// The singular stationary solution tabulated on (r_patch, r_end].
struct SingularSolutionTable {
  Nonlinearity spec;
  int dim = 3;
  double r_patch = 0.0;
  double R_max = 0.0;
  PatchMethod method = PatchMethod::Refined;
  double pre_decades = 0.0;
  ode::Tolerances tol{};
  BarrierOptions barrier{};
  PatchSeed seed;
  /// Integral over B(0, r_patch) of f(u*) in the radial measure s^{N-1} ds.
  double patch_flux = 0.0;
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
  /// False when u* reached zero before R_max.
  bool reached_R_max = true;
  /// Sum of local error estimates of u over the outward run from r_patch.
  double error_estimate = 0.0;
  long steps = 0;
  std::optional<double> patch_mismatch;

  double r_end() const { return r.back(); }
  /// Cubic Hermite interpolation in log r; the patch formula below r_patch.
  double value(double radius) const;
  double derivative(double radius) const;

  void write_csv(const std::string& path) const;
  nlohmann::json sidecar() const;
};

SingularSolutionTable build_singular(const Nonlinearity& spec, int dim,
                                     const SingularOptions& opts = {});

/// Regular solution with u(0) = alpha, u'(0) = 0.
struct ShootingSolution {
  double alpha = 0.0;
  int dim = 3;
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
  /// Set when u reached zero before R_max.
  std::optional<double> vanished_at;
  double r_start = 0.0;
  double error_estimate = 0.0;

  bool reached_R_max() const { return !vanished_at.has_value(); }
};

struct RegularOptions {
  ode::Tolerances tol{1e-13, 1e-13};
  int samples_per_decade = 4000;
  double r_start_max = 1e-6;
};

ShootingSolution integrate_regular(const Nonlinearity& spec, int dim, double alpha, double R_max,
                                   const RegularOptions& opts = {});

/// Regular solution with alpha = 2 u*(r_patch) compared with u* on [r_patch, r_hi].
struct RegularCrossCheck {
  double alpha = 0.0;
  double r_hi = 0.0;
  /// Extremes of (u(r, alpha) - u*(r)) / u*(r) over the window.
  double min_gap = 0.0;
  double max_gap = 0.0;
  int sign_changes = 0;
  bool stays_below() const { return max_gap < 0.0; }
};

RegularCrossCheck cross_check_regular(const SingularSolutionTable& table, double r_hi = 1.0);

/// Sup over interior output points of |u'' + (N-1)u'/r + f(u)| computed with
/// three-point differences on the output grid, each normalized by the largest
/// of the three terms at that point.
double ode_residual(const Nonlinearity& spec, int dim, const std::vector<double>& r,
                    const std::vector<double>& u);

struct FluxReport {
  double max_residual = 0.0;
  double residual_at_patch = 0.0;
  double worst_r = 0.0;
};

/// Compares -r^{N-1} u*'(r) with the patch flux plus the integral of
/// f(u*) s^{N-1} over [r_patch, r].
FluxReport verify_flux_identity(const SingularSolutionTable& table);

struct PohozaevTrace {
  std::vector<double> r;
  std::vector<double> P;
  /// Largest forward-difference slope dP/dr.
  double max_slope = 0.0;
  /// Largest |P - P(r_0)| relative to the largest term magnitude.
  double relative_variation = 0.0;
  /// Largest forward-difference slope relative to the slope scale of the terms.
  double max_relative_slope = 0.0;
  double P_at_patch = 0.0;
};

PohozaevTrace trace_pohozaev(const SingularSolutionTable& table, int stride = 1);

struct BoundCheck {
  std::string name;
  /// Empirical constant fitted on the smallest decade.
  double C = 0.0;
  /// Least-squares slope of log of the bounded quantity against log(1/r) on
  /// the smallest decade.
  double slope = 0.0;
  bool holds = false;
  std::string detail;
};

struct BoundReport {
  double delta = 0.0;
  double fit_r_min = 0.0;
  double fit_r_max = 0.0;
  std::vector<BoundCheck> checks;
  /// max f(u* - delta) / f(u*) over the fitting window.
  double gamma0 = 0.0;

  const BoundCheck& check(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Empirical versions of the growth bounds for u* near the origin; checked on
/// r <= 1 with constants fitted on the smallest decade of the table.
BoundReport verify_growth_bounds(const SingularSolutionTable& table, double delta);

/// F(u*(r)) (2N - 4) / r^2 at each table radius in [r_lo, r_hi].
std::vector<std::pair<double, double>> asymptotic_ratio(const SingularSolutionTable& table,
                                                        double r_lo, double r_hi);

}  // namespace stlab
