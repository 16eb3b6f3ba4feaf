#pragma once

#include "stlab/nonlinearity.hpp"

namespace stlab {

struct BarrierOptions {
  /// Relative accuracy of F and of F(F^{-1}(y)) = y.
  double tol_F = 1e-10;
  /// Lower end of the bracket searched by the inverse.
  double u_min = 1e-6;
  double quad_tol = 1e-13;
  int max_extensions = 400;
};

/// f(u) F(u) = integral over [u, inf) of exp(g(u) - g(s)) ds.
///
/// The head is integrated adaptively on doubling segments; the integral is
/// truncated at the first segment end M whose analytic tail bound drops below
/// tol_F times the head (1 / g'(M) in scaled units for log-convex tails, the
/// exact power-law tail otherwise), and that bound is added back.
double scaled_F(const Nonlinearity& spec, double u, const BarrierOptions& opts = {});

/// log F(u), finite even where F itself underflows.
double log_F(const Nonlinearity& spec, double u, const BarrierOptions& opts = {});

/// F(u) = integral over [u, inf) of ds / f(s).
double eval_F(const Nonlinearity& spec, double u, const BarrierOptions& opts = {});

/// u with F(u) = y. Throws OutOfRange when y >= F(u_min).
double eval_F_inverse(const Nonlinearity& spec, double y, const BarrierOptions& opts = {});

/// u with log F(u) = log_y.
double F_inverse_from_log(const Nonlinearity& spec, double log_y,
                          const BarrierOptions& opts = {});

/// f'(u) F(u); tends to 1 for the admissible class.
double fprime_F(const Nonlinearity& spec, double u, const BarrierOptions& opts = {});

/// F0(u) / f(u) where F0(u) = integral over [0, u] of f.
double scaled_F0(const Nonlinearity& spec, double u, double quad_tol = 1e-13);

/// F0(u) = integral over [0, u] of f.
double primitive_F0(const Nonlinearity& spec, double u, double quad_tol = 1e-13);

}  // namespace stlab
