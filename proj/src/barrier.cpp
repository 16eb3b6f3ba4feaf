#include "stlab/barrier.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stlab/errors.hpp"
#include "stlab/quadrature.hpp"

namespace stlab {

double scaled_F(const Nonlinearity& spec, double u, const BarrierOptions& opts) {
  if (!(u > 0.0)) throw OutOfRange("F needs u > 0, got " + std::to_string(u));
  const TailGrowth& tail = spec.tail();
  if (tail.kind == TailKind::PowerLaw && !(tail.exponent > 1.0)) {
    throw NonIntegrableTail("power-law tail with exponent <= 1 in " + spec.descriptor());
  }
  const double gu = spec.g(u);
  const double gp = spec.dg(u);
  auto integrand = [&](double t) { return std::exp(-spec.log_ratio(u, t)); };

  const double ell = (gp > 0.0 && std::isfinite(gp)) ? 1.0 / gp : std::max(u, 1.0);
  double head = 0.0;
  double a = 0.0;
  bool saw_growth = false;
  for (int k = 0; k < opts.max_extensions; ++k) {
    const double t = ell * std::ldexp(1.0, k);
    const double b = u + t;
    if (!std::isfinite(b)) break;
    const double ratio = std::exp(-spec.log_ratio(u, t));
    if (!(ratio < 1e250)) {
      throw NonIntegrableTail("1/f grows without bound beyond u=" + std::to_string(u) + " for " +
                              spec.descriptor());
    }
    head += quad::adaptive(integrand, a, t, opts.quad_tol).value;
    a = t;
    double tail_est = -1.0;
    if (tail.kind == TailKind::PowerLaw) {
      tail_est = ratio * b / (tail.exponent - 1.0);
      saw_growth = true;
    } else {
      const double gpb = spec.dg(b);
      if (gpb > 0.0) saw_growth = true;
      if (b >= tail.convex_from && gpb > 0.0) tail_est = ratio / gpb;
    }
    if (tail_est >= 0.0 && tail_est < opts.tol_F * head) return head + tail_est;
  }
  if (!saw_growth) {
    throw NonIntegrableTail("g' <= 0 at every tested truncation point for " +
                            spec.descriptor());
  }
  throw NonIntegrableTail("no truncation point with tail below tolerance for " +
                          spec.descriptor() + " at u=" + std::to_string(u));
}

double log_F(const Nonlinearity& spec, double u, const BarrierOptions& opts) {
  return std::log(scaled_F(spec, u, opts)) - spec.g(u);
}

double eval_F(const Nonlinearity& spec, double u, const BarrierOptions& opts) {
  return std::exp(log_F(spec, u, opts));
}

double fprime_F(const Nonlinearity& spec, double u, const BarrierOptions& opts) {
  return spec.dg(u) * scaled_F(spec, u, opts);
}

double F_inverse_from_log(const Nonlinearity& spec, double log_y, const BarrierOptions& opts) {
  if (!std::isfinite(log_y)) throw OutOfRange("F^{-1} needs a finite positive argument");
  // h is decreasing in u; search in x = log u.
  auto h = [&](double x) { return log_F(spec, std::exp(x), opts) - log_y; };
  const double x_min = std::log(opts.u_min);
  const double h_min = h(x_min);
  if (!(h_min > 0.0)) {
    throw OutOfRange("y=exp(" + std::to_string(log_y) + ") >= F(u_min) for " +
                     spec.descriptor());
  }
  double lo = std::max(0.0, x_min);
  double h_lo = lo == x_min ? h_min : h(lo);
  double hi = lo;
  double h_hi = h_lo;
  if (h_lo > 0.0) {
    for (int i = 0; i < 2000 && h_hi > 0.0; ++i) {
      lo = hi;
      h_lo = h_hi;
      hi = lo + std::log(2.0);
      h_hi = h(hi);
    }
    if (h_hi > 0.0) throw OutOfRange("no preimage found for y");
  } else {
    while (h_lo <= 0.0) {
      hi = lo;
      h_hi = h_lo;
      lo = std::max(x_min, lo - std::log(2.0));
      h_lo = lo == x_min ? h_min : h(lo);
    }
  }
  if (h_hi == 0.0) return std::exp(hi);
  // Bisection down to 1e-3 relative width, then Illinois-safeguarded secant.
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    const double hm = h(mid);
    if (hm > 0.0) {
      lo = mid;
      h_lo = hm;
    } else {
      hi = mid;
      h_hi = hm;
    }
  }
  int side = 0;
  for (int iter = 0; iter < 100; ++iter) {
    double x = hi - h_hi * (hi - lo) / (h_hi - h_lo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double hx = h(x);
    if (std::abs(hx) <= 0.5 * opts.tol_F || hi - lo <= 4e-16 * std::abs(x) + 1e-300) {
      return std::exp(x);
    }
    if (hx > 0.0) {
      lo = x;
      h_lo = hx;
      if (side == -1) h_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      h_hi = hx;
      if (side == 1) h_lo *= 0.5;
      side = 1;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double eval_F_inverse(const Nonlinearity& spec, double y, const BarrierOptions& opts) {
  if (!(y > 0.0)) throw OutOfRange("F^{-1} needs y > 0");
  return F_inverse_from_log(spec, std::log(y), opts);
}

double scaled_F0(const Nonlinearity& spec, double u, double quad_tol) {
  if (!(u > 0.0)) return 0.0;
  // Integrate in t = u - s.
  auto integrand = [&](double t) { return t < u ? std::exp(spec.log_ratio(u, -t)) : 0.0; };
  const double gp = spec.dg(u);
  if (!(gp > 0.0) || !std::isfinite(gp) || gp * u < 8.0) {
    return quad::adaptive(integrand, 0.0, u, quad_tol).value;
  }
  // Doubling segments; f increasing bounds the rest by s f(s)/f(u).
  const double ell = 1.0 / gp;
  double head = 0.0;
  double a = 0.0;
  for (int k = 0; a < u; ++k) {
    const double b = std::min(u, ell * std::ldexp(1.0, k));
    head += quad::adaptive(integrand, a, b, quad_tol).value;
    a = b;
    if (a < u && (u - a) * integrand(a) < 1e-3 * quad_tol * head) break;
  }
  return head;
}

double primitive_F0(const Nonlinearity& spec, double u, double quad_tol) {
  if (!(u > 0.0)) return 0.0;
  return spec.f(u) * scaled_F0(spec, u, quad_tol);
}

}  // namespace stlab
