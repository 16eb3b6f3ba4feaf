#pragma once

#include <map>
#include <string>
#include <vector>

#include "stlab/nonlinearity.hpp"
#include "stlab/singular_ode.hpp"

namespace stlab {

enum class OuterBC { Dirichlet, Neumann };

/// Radial nodes r_0 = 0 < r_1 < ... < r_M = R_outer.
struct RadialGrid {
  int dim = 3;
  std::vector<double> r;
  OuterBC bc = OuterBC::Neumann;
  /// Boundary value for Dirichlet; ignored for Neumann.
  double outer_value = 0.0;

  /// Geometric spacing from r1 with ratio `growth` until the spacing reaches
  /// the uniform spacing that fills the rest of [0, R_outer] with M nodes.
  /// r1 <= 0 selects 1e-3 R_outer.
  static RadialGrid geometric_uniform(int dim, double R_outer, int M, double r1 = 0.0,
                                      double growth = 1.1);
  static RadialGrid uniform(int dim, double R_outer, int M);

  /// Inserts every cell midpoint; spacing halves everywhere, r_1 included.
  RadialGrid refined() const;

  int M() const { return static_cast<int>(r.size()) - 1; }
  double R_outer() const { return r.back(); }
  /// Finite-volume cells [0, r_{1/2}], [r_{i-1/2}, r_{i+1/2}], ..., [r_{M-1/2}, r_M]
  /// in the measure r^{N-1} dr.
  std::vector<double> control_volumes() const;
};

struct RadialField {
  RadialGrid grid;
  std::vector<double> values;
  /// 1 where the value was clipped at the cap.
  std::vector<char> cap_mask;

  static RadialField constant(const RadialGrid& grid, double c);
  double sup() const;
  /// Piecewise-linear interpolant; the boundary value beyond R_outer.
  double at(double radius) const;
  double exterior_value() const;
  bool any_capped() const;
};

/// u* on the grid: nodes i >= 1 take min(cap, u*(r_i)), node 0 the smaller of
/// cap and the average of u* over B(0, r_1 / 2). Sets a Dirichlet outer
/// condition at u*(R_outer).
RadialField sample_singular(const SingularSolutionTable& table, RadialGrid grid, double cap);

/// |S^{k}|, the area of the unit k-sphere.
double sphere_area(int k);
/// Volume of the unit N-ball.
double unit_ball_volume(int dim);

/// J(a) = integral over [0, 2] of exp(-a x) (x (2 - x))^{(N-3)/2} dx, the
/// angular part of the radial heat kernel. Closed form for N = 3; tabulated
/// by adaptive quadrature with Hermite interpolation in log a otherwise.
double angular_kernel(int dim, double a);

/// Heat semigroup on radial fields of one grid. Product integration of the
/// reduced kernel against the piecewise-linear interpolant, plus the exact
/// kernel mass beyond R_outer times the exterior value. Matrices are cached
/// per time lag.
class HeatSemigroup {
 public:
  explicit HeatSemigroup(RadialGrid grid);

  const RadialGrid& grid() const { return grid_; }
  std::vector<double> apply(const std::vector<double>& values, double exterior, double t);
  RadialField apply(const RadialField& field, double t);
  /// Largest |1 - total kernel mass| over rows for lag t.
  double mass_defect(double t);
  std::size_t cached() const { return cache_.size(); }
  void clear_cache() { cache_.clear(); }

 private:
  struct Operator {
    std::vector<double> W;  // row-major (M+1)^2
    std::vector<double> tail;
    double mass_defect = 0.0;
  };
  const Operator& op(double t);
  Operator build(double t) const;

  RadialGrid grid_;
  std::map<double, Operator> cache_;
};

RadialField apply_semigroup(const RadialField& field, double t);

struct ULNormEstimate {
  double p = 1.0;
  /// sup over sampled centers of (integral over B(z, 1) of |u|^p)^{1/p}.
  double value = 0.0;
  /// The windowed integral itself at the maximizing center.
  double window_integral = 0.0;
  double best_center = 0.0;
  std::vector<double> centers;
};

/// Integral of |u|^p over B(z e_1, 1) in spherical shells about the origin.
double window_integral(const RadialField& field, double p, double z);

/// Uniformly local norm along a ray: 512-point scan of z in [0, R_outer]
/// refined by Brent's method around the best sample. Radially nonincreasing
/// data skip the scan: the centred window is maximal.
ULNormEstimate ul_norm(const RadialField& field, double p);

/// Finite-volume radial Laplacian with r^{N-1} weights; zero flux at r = 0.
struct RadialLaplacian {
  std::vector<double> lower, diag, upper;
  explicit RadialLaplacian(const RadialGrid& grid);
  std::vector<double> apply(const std::vector<double>& u) const;
};

/// Solves (I - dt L) x = rhs with the outer node pinned for Dirichlet.
std::vector<double> implicit_diffusion_solve(const RadialLaplacian& L, const RadialGrid& grid,
                                             double dt, std::vector<double> rhs);

struct ImexOptions {
  /// f(max u) dt above this raises ReactionOverflow.
  double overflow_guard = 1e300;
  bool reaction = true;
};

/// One step: backward Euler diffusion, explicit reaction.
RadialField step_imex(const RadialField& field, const Nonlinearity& spec, double dt,
                      const ImexOptions& opts = {});

/// Largest stable step safety / (f'(max u) + eps).
double stable_dt(const RadialField& field, const Nonlinearity& spec, double safety = 0.5);

/// CSV writers; 17 significant digits.
void write_snapshots_csv(const std::string& path, const std::vector<double>& times,
                         const std::vector<RadialField>& fields);

}  // namespace stlab
