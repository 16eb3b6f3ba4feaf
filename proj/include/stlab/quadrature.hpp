#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "stlab/errors.hpp"

namespace stlab::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b]: the panel with the
/// largest error estimate is bisected until the total error drops below
/// rel_tol * |I| or the rounding floor. Throws QuadratureFailure when the
/// panel budget runs out first.
template <class Fn>
Result adaptive(Fn&& fn, double a, double b, double rel_tol = 1e-12, int max_panels = 4000) {
  if (a == b) return {};
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Panel {
    double a, b, value, error, l1;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    Panel p{lo, hi, 0.0, 0.0, 0.0};
    p.value = GK::integrate(fn, lo, hi, 0, 0.0, &p.error, &p.l1);
    // Boost leaves the single-panel error on the reference interval [-1, 1].
    p.error *= 0.5 * (hi - lo);
    return p;
  };
  std::priority_queue<Panel> heap;
  std::vector<Panel> settled;
  heap.push(eval(a, b));
  double value = heap.top().value;
  double error = heap.top().error;
  double l1 = heap.top().l1;
  int panels = 1;
  while (!heap.empty()) {
    if (!std::isfinite(value) || !std::isfinite(error)) {
      throw QuadratureFailure("non-finite integral on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "]");
    }
    const double floor = std::max(50.0 * std::numeric_limits<double>::epsilon() * l1, 1e-300);
    if (error <= std::max(rel_tol * std::abs(value), floor)) break;
    if (panels >= max_panels) {
      throw QuadratureFailure("no convergence on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "], error " + std::to_string(error) +
                              " of " + std::to_string(value));
    }
    const Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = eval(worst.a, mid);
    const Panel right = eval(mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    ++panels;
    // Rounding in the integrand itself: splitting no longer helps.
    const bool stalled = left.error + right.error > 0.5 * worst.error &&
                         worst.error < 1e4 * std::numeric_limits<double>::epsilon() * worst.l1;
    if (stalled) {
      settled.push_back(left);
      settled.push_back(right);
    } else {
      heap.push(left);
      heap.push(right);
    }
  }
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    settled.push_back(heap.top());
    heap.pop();
  }
  for (const auto& p : settled) {
    value += p.value;
    error += p.error;
  }
  return {value, error};
}

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached rule of order n (n >= 1), computed by Newton iteration on P_n.
const GaussRule& gauss_legendre(int n);

}  // namespace stlab::quad
