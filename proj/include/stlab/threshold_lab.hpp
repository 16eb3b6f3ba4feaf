#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlab/radial_evolution.hpp"

namespace stlab {

/// Composition of perturbations applied in order to the uncapped u*.
struct PerturbationSpec {
  enum class Kind { RadialBump, Scaling, Truncation };
  struct Step {
    Kind kind = Kind::RadialBump;
    double r_c = 2.0;
    double sigma = 0.3;
    /// Signed, absolute.
    double amplitude = 0.0;
    double factor = 1.0;
    double cap = std::numeric_limits<double>::infinity();
  };
  std::vector<Step> steps;

  /// A exp(-(r - r_c)^2 / (2 sigma^2)) added to u*.
  static PerturbationSpec bump(double r_c, double sigma, double amplitude);
  static PerturbationSpec scaling(double theta);
  static PerturbationSpec truncation(double cap);
  PerturbationSpec then(const PerturbationSpec& next) const;

  std::string describe() const;
  nlohmann::json to_json() const;
};

enum class Side { Below, Above, Neutral, Mixed };
std::string to_string(Side s);

struct InitialData {
  /// Uncapped u* on the grid (node 0 is the ball average).
  RadialField ustar_raw;
  /// min(cap, u*), the stationary reference state.
  RadialField ustar;
  RadialField u0;
  double cap = 0.0;
  Side side = Side::Neutral;
};

/// u0 = min(cap, max(0, P(u*))): the perturbation acts before capping.
InitialData make_initial_data(const SingularSolutionTable& table, const RadialGrid& grid,
                              const PerturbationSpec& pert, double cap);

enum class Classification { GlobalBounded, BlowUp, Undetermined };
std::string to_string(Classification c);

struct EvolutionOptions {
  double T = 0.5;
  double safety = 0.5;
  /// dt never exceeds dt_max_fraction * T.
  double dt_max_fraction = 1e-3;
  double dt_floor = 1e-14;
  /// sup u must pass this for a blow-up verdict. Zero selects
  /// min(1e8, F^{-1}(100 dt_floor)), the largest level dt can still resolve.
  double sup_guard = 0.0;
  /// m(t) must exceed mass_growth * m(0) for a blow-up verdict.
  double mass_growth = 1e6;
  /// m(t) integrates f(u) over the innermost cells.
  int inner_cells = 10;
  double transient_fraction = 0.2;
  int snapshots = 20;
  bool reaction = true;
  /// Evolve d = u - u*_h against the discrete stationary residual of u*_h.
  /// Ignored without reaction (plain heat flow).
  bool balanced = true;
};

struct NormSample {
  double t = 0.0;
  double sup = 0.0;
  double l1ul = 0.0;
  double mass = 0.0;
};

struct EvolutionOutcome {
  Classification classification = Classification::Undetermined;
  double t_detect = std::numeric_limits<double>::quiet_NaN();
  double cap = 0.0;
  double sup_guard = 0.0;
  double m0 = 0.0;
  long steps = 0;
  double t_end = 0.0;
  std::vector<NormSample> series;
  std::vector<double> snapshot_times;
  std::vector<RadialField> snapshots;
  RadialField final_field;
  /// max over steps and nodes outside the patch of (u - u*) / u*.
  double above_ustar_max = -std::numeric_limits<double>::infinity();
  std::string note;

  nlohmann::json to_json() const;
  /// `t,sup_norm,l1ul_norm,f_mass_inner`, 17 significant digits.
  void write_norms_csv(const std::string& path) const;
};

/// Backward Euler diffusion with explicit reaction from data.u0, with
/// dt = safety min(dt_max_fraction T, 1 / f'(sup u)).
EvolutionOutcome evolve(const InitialData& data, const Nonlinearity& spec,
                        const EvolutionOptions& opts = {});

struct CaseReport {
  PerturbationSpec pert;
  Side side = Side::Neutral;
  Classification classification = Classification::Undetermined;
  bool cap_stable = false;
  /// t_detect does not increase with the cap (blow-up only).
  bool t_detect_monotone = true;
  std::vector<EvolutionOutcome> per_cap;

  nlohmann::json to_json() const;
};

/// Runs every cap; the verdict is the common classification when all caps
/// agree and Undetermined otherwise.
CaseReport run_case(const Nonlinearity& spec, const SingularSolutionTable& table,
                    const RadialGrid& grid, const PerturbationSpec& pert,
                    const std::vector<double>& caps, const EvolutionOptions& opts = {});

struct AmplificationSample {
  double t = 0.0;
  double alpha = 0.0;
};

/// Per snapshot, the largest alpha with u >= alpha u* on the innermost decade
/// of nodes r_1 <= r <= 10 r_1.
std::vector<AmplificationSample> amplification_probe(const EvolutionOutcome& outcome,
                                                     const RadialField& ustar_raw);

struct ScanRow {
  double factor = 0.0;
  double amplitude = 0.0;
  CaseReport report;
};

struct ScanReport {
  double r_c = 2.0;
  double sigma = 0.3;
  double ustar_rc = 0.0;
  std::vector<double> caps;
  std::vector<ScanRow> rows;
  /// Largest GlobalBounded and smallest BlowUp amplitude.
  double a_lower = -std::numeric_limits<double>::infinity();
  double a_upper = std::numeric_limits<double>::infinity();
  bool blowup_time_monotone = true;

  std::vector<Classification> classifications() const;
  nlohmann::json to_json() const;
  /// `amplitude,classification,t_detect,cap,sup_final,reaction_mass_final`.
  void write_csv(const std::string& path) const;
};

/// Bumps of amplitude factor * u*(r_c) for each factor, sorted ascending.
/// Throws NonMonotoneScan unless the verdicts run GlobalBounded, then at most
/// one contiguous Undetermined zone, then BlowUp.
ScanReport threshold_scan(const Nonlinearity& spec, const SingularSolutionTable& table,
                          const RadialGrid& grid, double r_c, double sigma,
                          std::vector<double> factors, const std::vector<double>& caps,
                          const EvolutionOptions& opts = {});

}  // namespace stlab
