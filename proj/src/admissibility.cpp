#include "stlab/admissibility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stlab/errors.hpp"

namespace stlab {

namespace {

const char* verdict_name(Verdict v) { return v == Verdict::Pass ? "PASS" : "FAIL"; }

void add_witness(ConditionResult& r, double u, double value, int cap) {
  r.verdict = Verdict::Fail;
  if (static_cast<int>(r.witnesses.size()) < cap) r.witnesses.push_back({u, value});
}

}  // namespace

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

bool AdmissibilityReport::all_pass() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const ConditionResult& c) { return c.verdict == Verdict::Pass; });
}

const ConditionResult& AdmissibilityReport::condition(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.condition == name) return c;
  }
  throw std::out_of_range("no condition " + name);
}

nlohmann::json AdmissibilityReport::to_json() const {
  nlohmann::json j;
  j["spec"] = spec;
  j["dim"] = dim;
  j["sampling"] = {{"u_min", u_min}, {"u_max", u_max}, {"n_samples", n_samples},
                   {"meaning", "PASS = no violation found on the sampled points"}};
  j["all_pass"] = all_pass();
  j["conditions"] = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : c.witnesses) w.push_back({{"u", x.u}, {"value", x.value}});
    j["conditions"].push_back({{"condition", c.condition},
                               {"verdict", verdict_name(c.verdict)},
                               {"witnesses", w},
                               {"detail", c.detail}});
  }
  j["limit_estimates"] = {
      {"g2_over_g1sq",
       {{"value", g2_over_g1sq.value}, {"error", g2_over_g1sq.error}, {"at_u", g2_over_g1sq.at_u}}},
      {"fprime_F",
       {{"value", fprime_F.value}, {"error", fprime_F.error}, {"at_u", fprime_F.at_u}}}};
  return j;
}

double Q_scaled(const Nonlinearity& spec, int dim, double u) {
  if (!(u > 0.0)) return 0.0;
  return u - (sobolev_exponent(dim) + 1.0) * scaled_F0(spec, u);
}

double Q_value(const Nonlinearity& spec, int dim, double u) {
  if (!(u > 0.0)) return 0.0;
  return u * spec.f(u) - (sobolev_exponent(dim) + 1.0) * primitive_F0(spec, u);
}

std::vector<std::pair<double, double>> check_fprime_F_limit(const Nonlinearity& spec,
                                                            const std::vector<double>& u_grid,
                                                            const BarrierOptions& opts) {
  std::vector<std::pair<double, double>> out;
  out.reserve(u_grid.size());
  for (double u : u_grid) {
    if (!(u > 0.0)) throw std::invalid_argument("u grid must be positive");
    out.emplace_back(u, fprime_F(spec, u, opts));
  }
  return out;
}

std::vector<std::pair<double, double>> check_log_convexity_ratio(
    const Nonlinearity& spec, const std::vector<double>& u_grid, double division_tol) {
  std::vector<std::pair<double, double>> out;
  out.reserve(u_grid.size());
  for (double u : u_grid) {
    const double gp = spec.dg(u);
    if (!(std::abs(gp) >= division_tol)) {
      throw DivisionNearZero("|g'(" + std::to_string(u) + ")| below division tolerance");
    }
    out.emplace_back(u, spec.d2g(u) / (gp * gp));
  }
  return out;
}

LimitEstimate extrapolate_limit(const std::vector<std::pair<double, double>>& series) {
  if (series.empty()) return {};
  LimitEstimate est;
  est.at_u = series.back().first;
  est.value = series.back().second;
  if (series.size() < 3) return est;
  const double x0 = series[series.size() - 3].second;
  const double x1 = series[series.size() - 2].second;
  const double x2 = series.back().second;
  const double d2 = x2 - 2.0 * x1 + x0;
  if (std::abs(d2) > 1e-300 && std::abs(d2) > 1e-14 * (std::abs(x0) + std::abs(x2))) {
    const double lim = x2 - (x2 - x1) * (x2 - x1) / d2;
    if (std::isfinite(lim)) {
      est.value = lim;
      est.error = std::abs(x2 - lim);
      return est;
    }
  }
  est.error = std::abs(x2 - x1);
  return est;
}

AdmissibilityReport check_admissibility(const Nonlinearity& spec, int dim,
                                        const AdmissibilityOptions& opts) {
  if (!(opts.u_max > 0.0)) throw std::invalid_argument("u_max must be positive");
  if (opts.n_samples < 100) throw std::invalid_argument("n_samples must be at least 100");
  const double p_s = sobolev_exponent(dim);
  const auto samples = log_spaced(std::min(opts.u_min, opts.u_max / 10.0), opts.u_max,
                                  opts.n_samples);

  AdmissibilityReport report;
  report.spec = spec.descriptor();
  report.dim = dim;
  report.u_min = samples.front();
  report.u_max = samples.back();
  report.n_samples = opts.n_samples;

  ConditionResult a1{"A1", Verdict::Pass, {}, "f(0) = 0 and f'(0) = 0"};
  const double f0 = spec.f(0.0);
  const double df0 = spec.df(0.0);
  if (std::abs(f0) > 1e-14) add_witness(a1, 0.0, f0, opts.max_witnesses);
  if (std::abs(df0) > 1e-14) add_witness(a1, 0.0, df0, opts.max_witnesses);

  ConditionResult a2{"A2", Verdict::Pass, {}, "f' > 0 and f'' > 0 at every sample; value is the offending derivative"};
  for (double u : samples) {
    const double fu = spec.f(u);
    double d1 = spec.df(u);
    double d2 = spec.d2f(u);
    if (!std::isfinite(fu) || !std::isfinite(d1) || !std::isfinite(d2)) {
      // Past overflow: sign(f') = sign(g'), sign(f'') = sign(g'' + g'^2).
      const double gp = spec.dg(u);
      d1 = gp;
      d2 = spec.d2g(u) + gp * gp;
    }
    if (!(d1 > 0.0)) add_witness(a2, u, d1, opts.max_witnesses);
    if (!(d2 > 0.0)) add_witness(a2, u, d2, opts.max_witnesses);
  }

  ConditionResult a3{"A3", Verdict::Pass, {},
                     "g'' >= 0 on the upper decade of samples and g''/g'^2 -> 0"};
  std::vector<double> upper;
  for (double u : samples) {
    if (u >= opts.u_max / 10.0) upper.push_back(u);
  }
  const auto ratios = check_log_convexity_ratio(spec, upper, opts.division_tol);
  for (const auto& [u, r] : ratios) {
    if (!(spec.d2g(u) >= 0.0)) add_witness(a3, u, spec.d2g(u), opts.max_witnesses);
  }
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    const double prev = std::abs(ratios[i - 1].second);
    const double cur = std::abs(ratios[i].second);
    if (cur > prev * (1.0 + 1e-9) + 1e-15) {
      add_witness(a3, ratios[i].first, ratios[i].second, opts.max_witnesses);
    }
  }
  {
    const double u_top = opts.u_max;
    const auto tail = check_log_convexity_ratio(spec, {u_top / 4.0, u_top / 2.0, u_top},
                                                opts.division_tol);
    report.g2_over_g1sq = extrapolate_limit(tail);
    if (!(std::abs(tail.back().second) <= opts.ratio_tol)) {
      add_witness(a3, u_top, tail.back().second, opts.max_witnesses);
    }
  }

  ConditionResult a4{"A4", Verdict::Pass, {}, "Q(u) >= 0; value is Q(u)/f(u)"};
  for (double u : samples) {
    const double inner = (p_s + 1.0) * scaled_F0(spec, u);
    const double q = u - inner;
    const double slack = opts.tol_Q * std::max({u, inner, 1e-300});
    if (q < -slack) add_witness(a4, u, q, opts.max_witnesses);
  }

  report.conditions = {a1, a2, a3, a4};

  try {
    const double u_top = opts.u_max;
    report.fprime_F = extrapolate_limit(
        check_fprime_F_limit(spec, {u_top / 4.0, u_top / 2.0, u_top}, opts.barrier));
  } catch (const NonIntegrableTail&) {
    report.fprime_F = {std::nan(""), std::nan(""), opts.u_max};
  }
  return report;
}

}  // namespace stlab
