#include "stlab/monotone_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stlab/errors.hpp"
#include "stlab/quadrature.hpp"

namespace stlab {

std::vector<double> Trajectory::at(double t) const {
  if (times.empty()) throw TimeMeshMismatch("empty trajectory");
  const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
  if (t < times.front() - tol || t > times.back() + tol) {
    throw TimeMeshMismatch("t=" + std::to_string(t) + " outside [" + std::to_string(times.front()) +
                           ", " + std::to_string(times.back()) + "]");
  }
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
  std::vector<double> out(values[j].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - w) * values[j - 1][i] + w * values[j][i];
  }
  return out;
}

RadialField Trajectory::field(std::size_t k) const {
  RadialField f;
  f.grid = grid;
  f.values = values.at(k);
  f.cap_mask.assign(f.values.size(), 0);
  return f;
}

Trajectory stationary_trajectory(const RadialField& field, double t_end) {
  Trajectory tr;
  tr.grid = field.grid;
  tr.times = {0.0, t_end};
  tr.values = {field.values, field.values};
  return tr;
}

DuhamelMap::DuhamelMap(RadialGrid grid, Nonlinearity spec, double t_obs, DuhamelOptions opts)
    : grid_(std::move(grid)), spec_(std::move(spec)), t_obs_(t_obs), opts_(opts), S_(grid_) {
  if (!(t_obs > 0.0)) throw std::invalid_argument("t_obs must be positive");
  if (opts.slices < 1 || opts.gl_order < 1) throw std::invalid_argument("bad Duhamel options");
  const double D = t_obs / opts.slices;
  for (int n = 0; n <= opts.slices; ++n) times_.push_back(t_obs * n / opts.slices);
  times_.back() = t_obs;
  // S(tau) is only close to the identity once sqrt(tau) is well below r_1.
  identity_lag_ = std::min({opts.identity_lag, 1e-3 * grid_.r[1] * grid_.r[1], 0.5 * D});
  const int panels = std::max(1, static_cast<int>(std::ceil(std::log2(D / identity_lag_))));
  const double ratio = std::pow(D / identity_lag_, 1.0 / panels);
  const auto& gl = quad::gauss_legendre(opts.gl_order);
  double hi = D;
  for (int k = 0; k < panels; ++k) {
    const double lo = k + 1 == panels ? identity_lag_ : hi / ratio;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      near_lags_.push_back(lo + 0.5 * (hi - lo) * (gl.nodes[q] + 1.0));
      near_weights_.push_back(0.5 * (hi - lo) * gl.weights[q]);
    }
    hi = lo;
  }
  for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
    far_offsets_.push_back(0.5 * D * (gl.nodes[q] + 1.0));
    far_weights_.push_back(0.5 * D * gl.weights[q]);
  }
}

std::size_t DuhamelMap::lag_count() const {
  const std::size_t S = times_.size() - 1;
  return S + near_lags_.size() + (S - 1) * far_offsets_.size();
}

void DuhamelMap::accumulate(double lag, const std::vector<std::pair<std::size_t, double>>& targets,
                            double weight, const Trajectory& prev,
                            std::vector<std::vector<double>>& out) {
  const std::size_t n = grid_.r.size();
  std::vector<double> fvals(n);
  for (const auto& [slot, s] : targets) {
    const auto p = prev.at(std::max(0.0, s));
    for (std::size_t i = 0; i < n; ++i) fvals[i] = spec_.f(p[i]);
    auto& dst = out[slot];
    if (lag <= 0.0) {
      for (std::size_t i = 0; i < n; ++i) dst[i] += weight * fvals[i];
    } else {
      const auto v = S_.apply(fvals, fvals.back(), lag);
      for (std::size_t i = 0; i < n; ++i) dst[i] += weight * v[i];
    }
  }
  if (!opts_.cache_operators) S_.clear_cache();
}

std::vector<std::vector<double>> DuhamelMap::evaluate(const Trajectory& prev, const RadialField& u0,
                                                      std::size_t first) {
  if (u0.values.size() != grid_.r.size()) throw std::invalid_argument("u0 does not match the grid");
  if (prev.times.empty() || prev.times.front() > 1e-12 * t_obs_ ||
      prev.times.back() < t_obs_ * (1.0 - 1e-12)) {
    throw TimeMeshMismatch("previous iterate does not cover [0, t_obs]");
  }
  const std::size_t S = times_.size() - 1;
  const double D = t_obs_ / opts_.slices;
  const std::size_t n = grid_.r.size();
  // out[j] holds the slice first + j.
  std::vector<std::vector<double>> out(S + 1 - first, std::vector<double>(n, 0.0));
  std::vector<std::pair<std::size_t, double>> targets;
  for (std::size_t m = std::max<std::size_t>(first, 1); m <= S; ++m) {
    out[m - first] = S_.apply(u0.values, u0.values.back(), times_[m]);
    if (!opts_.cache_operators) S_.clear_cache();
  }
  if (first == 0) out[0] = u0.values;
  // Lags inside the slice just before each target.
  for (std::size_t j = 0; j < near_lags_.size(); ++j) {
    targets.clear();
    for (std::size_t m = std::max<std::size_t>(first, 1); m <= S; ++m) {
      targets.emplace_back(m - first, times_[m] - near_lags_[j]);
    }
    accumulate(near_lags_[j], targets, near_weights_[j], prev, out);
  }
  targets.clear();
  for (std::size_t m = std::max<std::size_t>(first, 1); m <= S; ++m) {
    targets.emplace_back(m - first, times_[m] - 0.5 * identity_lag_);
  }
  accumulate(0.0, targets, identity_lag_, prev, out);
  // Whole slices further back: lag k D + offset, k >= 1.
  for (std::size_t k = 1; k < S; ++k) {
    for (std::size_t q = 0; q < far_offsets_.size(); ++q) {
      const double lag = k * D + far_offsets_[q];
      targets.clear();
      for (std::size_t m = std::max(first, k + 1); m <= S; ++m) {
        targets.emplace_back(m - first, times_[m] - lag);
      }
      if (!targets.empty()) accumulate(lag, targets, far_weights_[q], prev, out);
    }
  }
  if (grid_.bc == OuterBC::Dirichlet) {
    for (auto& v : out) v.back() = u0.values.back();
  }
  return out;
}

Trajectory DuhamelMap::apply(const Trajectory& prev, const RadialField& u0) {
  Trajectory out;
  out.grid = grid_;
  out.times = times_;
  out.values = evaluate(prev, u0, 0);
  return out;
}

RadialField DuhamelMap::apply_final(const Trajectory& prev, const RadialField& u0) {
  RadialField f;
  f.grid = grid_;
  f.values = std::move(evaluate(prev, u0, times_.size() - 1).front());
  f.cap_mask.assign(f.values.size(), 0);
  return f;
}

RadialField duhamel_map(const Trajectory& prev, const RadialField& u0, const Nonlinearity& spec,
                        double t_obs, const DuhamelOptions& opts) {
  auto o = opts;
  o.cache_operators = false;
  DuhamelMap map(u0.grid, spec, t_obs, o);
  return map.apply_final(prev, u0);
}

FixedPointResidual fixed_point_residual(const RadialField& ustar, const Nonlinearity& spec,
                                        double t_obs, double radius, const DuhamelOptions& opts) {
  const auto out = duhamel_map(stationary_trajectory(ustar, t_obs), ustar, spec, t_obs, opts);
  const auto& g = ustar.grid;
  const auto vol = g.control_volumes();
  const double area = sphere_area(g.dim - 1);
  FixedPointResidual res;
  res.radius = radius;
  for (std::size_t i = 0; i < g.r.size(); ++i) {
    const double d = std::abs(out.values[i] - ustar.values[i]);
    res.sup = std::max(res.sup, d);
    res.l1_total += area * vol[i] * d;
    if (g.r[i] <= radius) res.l1_ball += area * vol[i] * d;
  }
  return res;
}

std::string to_string(LadderSeed s) { return s == LadderSeed::FromAbove ? "from_above" : "from_below"; }

namespace {

double sup_at(const Trajectory& tr, std::size_t k) {
  const auto& v = tr.values[k];
  return *std::max_element(v.begin(), v.end());
}

// Differences between two trajectories on the same slice mesh.
template <class Fn>
void for_each_pair(const Trajectory& a, const Trajectory& b, Fn&& fn) {
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    const auto va = a.times.size() == b.times.size() ? b.values[k] : b.at(a.times[k]);
    for (std::size_t i = 0; i < va.size(); ++i) fn(a.values[k][i], va[i]);
  }
}

}  // namespace

IterationLadder run_ladder(LadderSeed seed, const RadialField& u0, const RadialField& upper,
                           DuhamelMap& map, const LadderOptions& opts) {
  const std::size_t n = u0.values.size();
  if (upper.values.size() != n) throw std::invalid_argument("upper does not match the grid");
  for (std::size_t i = 0; i < n; ++i) {
    if (u0.values[i] > upper.values[i] + opts.ladder_tol) {
      throw std::invalid_argument("u0 must lie below u* at every node");
    }
  }
  IterationLadder L;
  L.seed = seed;
  L.t_obs = map.t_obs();
  RadialField start = upper;
  if (seed == LadderSeed::FromBelow) std::fill(start.values.begin(), start.values.end(), 0.0);
  Trajectory first;
  first.grid = u0.grid;
  first.times = map.slice_times();
  first.values.assign(first.times.size(), start.values);
  L.iterates.push_back(std::move(first));
  L.sup_norm.push_back(sup_at(L.iterates.back(), L.iterates.back().times.size() - 1));
  const double sign = seed == LadderSeed::FromBelow ? 1.0 : -1.0;
  for (int k = 1; k <= opts.k_max; ++k) {
    Trajectory next = map.apply(L.iterates.back(), u0);
    double gap = 0.0;
    double violation = 0.0;
    for_each_pair(next, L.iterates.back(), [&](double now, double before) {
      gap = std::max(gap, std::abs(now - before));
      violation = std::max(violation, -sign * (now - before));
    });
    L.ordering_violation_max = std::max(L.ordering_violation_max, violation);
    L.iterates.push_back(std::move(next));
    L.sup_norm.push_back(sup_at(L.iterates.back(), L.iterates.back().times.size() - 1));
    L.cauchy_gaps.push_back(gap);
    if (violation > opts.ladder_tol) {
      throw OrderingViolation(to_string(seed) + " iterate " + std::to_string(k) +
                              " breaks monotonicity by " + std::to_string(violation));
    }
    if (opts.stop_on_gap && gap < opts.ladder_tol) break;
  }
  return L;
}

IterationLadder run_ladder(LadderSeed seed, const RadialField& u0, const RadialField& upper,
                           const Nonlinearity& spec, double t_obs, const LadderOptions& opts) {
  DuhamelMap map(u0.grid, spec, t_obs, opts.duhamel);
  return run_ladder(seed, u0, upper, map, opts);
}

double sandwich_violation(const IterationLadder& below, const IterationLadder& above) {
  double worst = -INFINITY;
  for (const auto& v : below.iterates) {
    for (const auto& w : above.iterates) {
      for_each_pair(v, w, [&](double a, double b) { worst = std::max(worst, a - b); });
    }
  }
  return worst;
}

nlohmann::json IterationLadder::to_json() const {
  return {{"seed", to_string(seed)},
          {"t_obs", t_obs},
          {"k", static_cast<int>(iterates.size()) - 1},
          {"sup_norm_per_iterate", sup_norm},
          {"cauchy_gaps", cauchy_gaps},
          {"ordering_violation_max", ordering_violation_max}};
}

MaximalSolutionEstimate limit_estimate(const IterationLadder& ladder) {
  MaximalSolutionEstimate est;
  est.limit = ladder.at_obs(ladder.iterates.size() - 1);
  est.iterations = static_cast<int>(ladder.iterates.size()) - 1;
  const auto& g = ladder.cauchy_gaps;
  est.cauchy_gap = g.empty() ? 0.0 : g.back();
  est.gaps_decreasing = g.size() >= 3 && g[g.size() - 1] < g[g.size() - 2] &&
                        g[g.size() - 2] < g[g.size() - 3];
  return est;
}

nlohmann::json BoundednessReport::to_json() const {
  return {{"window", {t0, T}},
          {"sup_w4", sup_w4},
          {"f_w3_ul_norm", f_w3_ul_norm},
          {"exponent", exponent},
          {"finite", finite}};
}

BoundednessReport check_immediate_boundedness(const IterationLadder& ladder, const Nonlinearity& spec,
                                              double t0, double T, double eps) {
  if (ladder.seed != LadderSeed::FromAbove) {
    throw std::invalid_argument("boundedness is checked on the ladder from above");
  }
  if (ladder.iterates.size() < 5) throw std::invalid_argument("need iterates up to w_4");
  if (!(t0 < T)) throw std::invalid_argument("empty time window");
  BoundednessReport rep;
  rep.t0 = t0;
  rep.T = T;
  const auto& w4 = ladder.iterates[4];
  const auto& w3 = ladder.iterates[3];
  rep.exponent = 0.5 * w4.grid.dim + eps;
  bool any = false;
  for (std::size_t k = 0; k < w4.times.size(); ++k) {
    const double t = w4.times[k];
    if (t < t0 || t > T) continue;
    any = true;
    rep.sup_w4 = std::max(rep.sup_w4, sup_at(w4, k));
    RadialField f = w3.field(k);
    for (double& v : f.values) v = spec.f(v);
    f.grid.bc = OuterBC::Neumann;
    rep.f_w3_ul_norm = std::max(rep.f_w3_ul_norm, ul_norm(f, rep.exponent).value);
  }
  if (!any) throw TimeMeshMismatch("no slice inside the window");
  rep.finite = std::isfinite(rep.sup_w4) && std::isfinite(rep.f_w3_ul_norm);
  return rep;
}

}  // namespace stlab
