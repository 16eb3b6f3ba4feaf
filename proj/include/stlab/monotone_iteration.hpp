#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlab/radial_evolution.hpp"

namespace stlab {

/// Radial fields on one grid at increasing times; linear in t between them.
struct Trajectory {
  RadialGrid grid;
  std::vector<double> times;
  std::vector<std::vector<double>> values;

  std::vector<double> at(double t) const;
  RadialField field(std::size_t k) const;
  RadialField final_field() const { return field(times.size() - 1); }
};

/// The same field at t = 0 and t = t_end.
Trajectory stationary_trajectory(const RadialField& field, double t_end);

struct DuhamelOptions {
  /// Uniform time slices on [0, t_obs].
  int slices = 64;
  /// Gauss-Legendre order on each graded panel inside a slice.
  int gl_order = 4;
  /// Lags below this (and below 1e-3 r_1^2) use S = identity.
  double identity_lag = 1e-6;
  /// Keep every semigroup matrix between applications. Off frees each one
  /// after use (large grids, single application).
  bool cache_operators = true;
};

/// w(t) = S(t) u0 + integral over [0, t] of S(t - s) f(prev(s)) ds, evaluated
/// directly at every slice time. Slices further back than one slice get
/// Gauss-Legendre in s; the nearest slice uses panels graded geometrically
/// toward zero lag and the identity on the last one.
class DuhamelMap {
 public:
  DuhamelMap(RadialGrid grid, Nonlinearity spec, double t_obs, DuhamelOptions opts = {});

  Trajectory apply(const Trajectory& prev, const RadialField& u0);
  /// Only the value at t_obs.
  RadialField apply_final(const Trajectory& prev, const RadialField& u0);
  const std::vector<double>& slice_times() const { return times_; }
  double t_obs() const { return t_obs_; }
  HeatSemigroup& semigroup() { return S_; }
  /// Number of distinct lags (semigroup matrices) the map uses.
  std::size_t lag_count() const;

 private:
  std::vector<std::vector<double>> evaluate(const Trajectory& prev, const RadialField& u0,
                                            std::size_t first);
  void accumulate(double lag, const std::vector<std::pair<std::size_t, double>>& targets,
                  double weight, const Trajectory& prev, std::vector<std::vector<double>>& out);

  RadialGrid grid_;
  Nonlinearity spec_;
  double t_obs_;
  DuhamelOptions opts_;
  HeatSemigroup S_;
  std::vector<double> times_;
  double identity_lag_ = 0.0;
  std::vector<double> near_lags_, near_weights_;
  std::vector<double> far_offsets_, far_weights_;
};

/// One application of the map, returned at t_obs. Throws TimeMeshMismatch when
/// prev does not cover [0, t_obs].
RadialField duhamel_map(const Trajectory& prev, const RadialField& u0, const Nonlinearity& spec,
                        double t_obs, const DuhamelOptions& opts = {});

struct FixedPointResidual {
  double radius = 1.0;
  /// Integral of |D(u*) - u*| over B(0, radius) and over the whole grid.
  double l1_ball = 0.0;
  double l1_total = 0.0;
  double sup = 0.0;
};

/// One application of the map to the stationary trajectory at u*, with u0 = u*.
FixedPointResidual fixed_point_residual(const RadialField& ustar, const Nonlinearity& spec,
                                        double t_obs, double radius = 1.0,
                                        const DuhamelOptions& opts = {});

enum class LadderSeed { FromAbove, FromBelow };
std::string to_string(LadderSeed s);

struct LadderOptions {
  int k_max = 8;
  double ladder_tol = 1e-8;
  DuhamelOptions duhamel{};
  /// Stop once the Cauchy gap drops below ladder_tol.
  bool stop_on_gap = true;
};

struct IterationLadder {
  LadderSeed seed = LadderSeed::FromBelow;
  double t_obs = 0.0;
  /// iterates[0] is the seed (u* or 0).
  std::vector<Trajectory> iterates;
  /// sup over nodes at t_obs, per iterate.
  std::vector<double> sup_norm;
  /// sup over nodes and slices of |x_k - x_{k-1}|, k >= 1.
  std::vector<double> cauchy_gaps;
  /// Largest step against the expected direction in k, over nodes and slices.
  double ordering_violation_max = 0.0;

  RadialField at_obs(std::size_t k) const { return iterates[k].final_field(); }
  nlohmann::json to_json() const;
};

/// Picard ladder from above (w_0 = upper, normally the capped u*) or below
/// (v_0 = 0). Throws OrderingViolation when monotonicity in k fails by more
/// than ladder_tol at any node and slice.
IterationLadder run_ladder(LadderSeed seed, const RadialField& u0, const RadialField& upper,
                           const Nonlinearity& spec, double t_obs, const LadderOptions& opts = {});

/// Same, reusing a map (and its cached semigroup matrices).
IterationLadder run_ladder(LadderSeed seed, const RadialField& u0, const RadialField& upper,
                           DuhamelMap& map, const LadderOptions& opts = {});

/// max over k, j, slices and nodes of v_k - w_j.
double sandwich_violation(const IterationLadder& below, const IterationLadder& above);

struct MaximalSolutionEstimate {
  RadialField limit;
  int iterations = 0;
  double cauchy_gap = 0.0;
  /// The last three gaps decrease.
  bool gaps_decreasing = false;
};

MaximalSolutionEstimate limit_estimate(const IterationLadder& ladder);

struct BoundednessReport {
  double t0 = 0.0;
  double T = 0.0;
  /// sup of iterate 4 over slices in [t0, T].
  double sup_w4 = 0.0;
  /// L^{N/2 + eps}_ul norm of f(iterate 3), largest over the same slices.
  double f_w3_ul_norm = 0.0;
  double exponent = 0.0;
  bool finite = false;
  nlohmann::json to_json() const;
};

BoundednessReport check_immediate_boundedness(const IterationLadder& ladder, const Nonlinearity& spec,
                                              double t0, double T, double eps = 0.1);

}  // namespace stlab
