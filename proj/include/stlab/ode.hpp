#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "stlab/errors.hpp"

namespace stlab::ode {

struct Tolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  /// Smallest admissible step in the independent variable before StepUnderflow.
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 5'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  /// Sum of accepted local error estimates of component 0 (absolute units).
  double error_sum = 0.0;
};

/// One accepted Dormand-Prince step with its continuous extension.
template <std::size_t D>
struct DenseStep {
  using State = std::array<double, D>;
  double t0 = 0.0;
  double t1 = 0.0;
  State y0{};
  State y1{};
  std::array<State, 5> coeff{};

  State at(double t) const {
    const double h = t1 - t0;
    const double th = h == 0.0 ? 0.0 : (t - t0) / h;
    const double th1 = 1.0 - th;
    State y{};
    for (std::size_t i = 0; i < D; ++i) {
      y[i] = coeff[0][i] +
             th * (coeff[1][i] + th1 * (coeff[2][i] + th * (coeff[3][i] + th1 * coeff[4][i])));
    }
    return y;
  }
};

/// Result of an integration: final point and counters.
template <std::size_t D>
struct Outcome {
  double t = 0.0;
  std::array<double, D> y{};
  Stats stats;
  bool stopped_by_observer = false;
};

/// Explicit Dormand-Prince 5(4) with Hairer's dense output. `rhs(t, y)`
/// returns dy/dt; `observer(step)` sees every accepted step and may return
/// false to stop. Throws StepUnderflow when the controller shrinks the step
/// below tol.min_step.
template <std::size_t D, class Rhs, class Observer>
Outcome<D> integrate(Rhs&& rhs, double t0, std::array<double, D> y0, double t_end,
                     const Tolerances& tol, Observer&& observer, double h_init = 0.0) {
  using State = std::array<double, D>;
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  Outcome<D> out;
  const double dir = t_end >= t0 ? 1.0 : -1.0;
  double t = t0;
  State y = y0;
  State k1 = rhs(t, y);

  auto combine = [&](const State& base, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State r = base;
    for (const auto& [c, k] : terms) {
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < D; ++i) r[i] += h * c * (*k)[i];
    }
    return r;
  };

  double h = h_init;
  if (h <= 0.0) {
    double scale = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double sc = tol.abs_tol + tol.rel_tol * std::abs(y[i]);
      scale = std::max(scale, std::abs(k1[i]) / sc);
    }
    h = scale > 0.0 ? 0.01 / scale : 1e-3;
    h = std::min(h, std::abs(t_end - t0));
    h = std::min(h, tol.max_step);
    h = std::max(h, 10.0 * tol.min_step);
  }

  bool rejected_last = false;
  while (dir * (t_end - t) > 0.0) {
    if (out.stats.accepted + out.stats.rejected >= tol.max_steps) {
      throw StepUnderflow("step budget exhausted at t=" + std::to_string(t));
    }
    bool last = false;
    if (h >= std::abs(t_end - t)) {
      h = std::abs(t_end - t);
      last = true;
    }
    const double hs = dir * h;
    const State k2 = rhs(t + c2 * hs, combine(y, hs, {{a21, &k1}}));
    const State k3 = rhs(t + c3 * hs, combine(y, hs, {{a31, &k1}, {a32, &k2}}));
    const State k4 = rhs(t + c4 * hs, combine(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const State k5 =
        rhs(t + c5 * hs, combine(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const State k6 = rhs(
        t + hs, combine(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const State y1 = combine(y, hs, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    const State k7 = rhs(t + hs, y1);

    double err = 0.0;
    double err0 = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < D; ++i) {
      const double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      if (i == 0) err0 = std::abs(e);
      const double sc = tol.abs_tol + tol.rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
      err += (e / sc) * (e / sc);
      finite = finite && std::isfinite(y1[i]);
    }
    err = std::sqrt(err / D);
    if (!finite || !std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      DenseStep<D> step;
      step.t0 = t;
      step.t1 = t + hs;
      step.y0 = y;
      step.y1 = y1;
      for (std::size_t i = 0; i < D; ++i) {
        const double ydiff = y1[i] - y[i];
        const double bspl = hs * k1[i] - ydiff;
        step.coeff[0][i] = y[i];
        step.coeff[1][i] = ydiff;
        step.coeff[2][i] = bspl;
        step.coeff[3][i] = ydiff - hs * k7[i] - bspl;
        step.coeff[4][i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                 d6 * k6[i] + d7 * k7[i]);
      }
      ++out.stats.accepted;
      out.stats.error_sum += err0;
      t = last ? t_end : t + hs;
      y = y1;
      k1 = k7;
      if (!observer(step)) {
        out.stopped_by_observer = true;
        break;
      }
      double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 5.0);
      h = std::min(h * fac, tol.max_step);
      rejected_last = false;
    } else {
      ++out.stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      rejected_last = true;
    }
    if (h < tol.min_step && dir * (t_end - t) > tol.min_step) {
      std::string state;
      for (std::size_t i = 0; i < D; ++i) state += " " + std::to_string(y[i]);
      throw StepUnderflow("adaptive step " + std::to_string(h) + " below floor at t=" +
                          std::to_string(t) + ", last state" + state);
    }
  }
  out.t = t;
  out.y = y;
  return out;
}

}  // namespace stlab::ode
