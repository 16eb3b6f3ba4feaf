#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlab/barrier.hpp"
#include "stlab/nonlinearity.hpp"

namespace stlab {

enum class Verdict { Pass, Fail };

struct Witness {
  double u = 0.0;
  double value = 0.0;
};

struct ConditionResult {
  std::string condition;  // "A1" .. "A4"
  Verdict verdict = Verdict::Pass;
  std::vector<Witness> witnesses;
  std::string detail;
};

struct LimitEstimate {
  double value = 0.0;
  double error = 0.0;
  double at_u = 0.0;
};

/// Sampling-based verdicts on (A1)-(A4). PASS means no violation was found on
/// the samples; nothing is claimed between them.
struct AdmissibilityReport {
  std::string spec;
  int dim = 3;
  double u_min = 0.0;
  double u_max = 0.0;
  int n_samples = 0;
  std::vector<ConditionResult> conditions;
  LimitEstimate g2_over_g1sq;
  LimitEstimate fprime_F;

  bool all_pass() const;
  const ConditionResult& condition(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct AdmissibilityOptions {
  double u_min = 1e-6;
  double u_max = 1e3;
  int n_samples = 2000;
  /// Relative slack for Q >= 0, scaled by the size of the two terms of Q.
  double tol_Q = 1e-12;
  /// (A3) needs |g''/g'^2| below this at the largest sample.
  double ratio_tol = 1e-2;
  /// Guard for division by g'(u).
  double division_tol = 1e-14;
  int max_witnesses = 8;
  BarrierOptions barrier;
};

AdmissibilityReport check_admissibility(const Nonlinearity& spec, int dim,
                                        const AdmissibilityOptions& opts = {});

/// Q(u) = u f(u) - (p_S + 1) F0(u).
double Q_value(const Nonlinearity& spec, int dim, double u);

/// Q(u) / f(u), finite where f overflows.
double Q_scaled(const Nonlinearity& spec, int dim, double u);

/// (u, f'(u) F(u)) along an ascending grid.
std::vector<std::pair<double, double>> check_fprime_F_limit(const Nonlinearity& spec,
                                                            const std::vector<double>& u_grid,
                                                            const BarrierOptions& opts = {});

/// (u, g''(u) / g'(u)^2). Throws DivisionNearZero when |g'(u)| < division_tol.
std::vector<std::pair<double, double>> check_log_convexity_ratio(
    const Nonlinearity& spec, const std::vector<double>& u_grid, double division_tol = 1e-14);

/// Aitken extrapolation of the last three entries of a sequence.
LimitEstimate extrapolate_limit(const std::vector<std::pair<double, double>>& series);

std::vector<double> log_spaced(double lo, double hi, int n);

}  // namespace stlab
