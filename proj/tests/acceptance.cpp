// One line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stlab/admissibility.hpp"
#include "stlab/monotone_iteration.hpp"
#include "stlab/singular_ode.hpp"
#include "stlab/threshold_lab.hpp"

using namespace stlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Tables shared between criteria; each is built once, by whichever criterion needs it first.
const SingularSolutionTable& table(const Nonlinearity& spec, int dim) {
  static std::map<std::string, std::unique_ptr<SingularSolutionTable>> cache;
  const auto key = spec.descriptor() + "/" + std::to_string(dim);
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<SingularSolutionTable>(build_singular(spec, dim));
  return *slot;
}

Outcome c1() {
  const auto& t = table(Nonlinearity::pure_power(3), 5);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.r.size(); ++i) {
    if (t.r[i] < 1e-2 || t.r[i] > 1.0) continue;
    const double exact = std::sqrt(2.0) / t.r[i];
    worst = std::max(worst, std::abs(t.u[i] - exact) / exact);
  }
  return {worst <= 1e-3, fmt("max relative error of u* against sqrt(2)/r on [1e-2, 1]: %.2e", worst)};
}

Outcome c2() {
  const auto spec = Nonlinearity::power_exp(5, 2);
  bool inside = true;
  std::vector<double> dev;
  std::string detail = "ratio range on the smallest decade per r_patch:";
  for (double rp : {1e-3, 1e-5, 1e-7}) {
    SingularOptions o;
    o.r_patch = rp;
    const auto t = build_singular(spec, 3, o);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& [r, v] : asymptotic_ratio(t, t.r.front(), 10.0 * t.r.front())) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    inside = inside && lo >= 0.95 && hi <= 1.05;
    dev.push_back(std::max(std::abs(lo - 1.0), std::abs(hi - 1.0)));
    detail += fmt(" %.0e:[%.4f, %.4f]", rp, lo, hi);
  }
  const bool tighter = dev[1] < dev[0] && dev[2] < dev[1];
  return {inside && tighter, detail + (tighter ? ", tightening" : ", NOT tightening")};
}

Outcome c3() {
  const AdmissibilityOptions ao;
  const auto pe = Nonlinearity::power_exp(5, 2);
  const auto cut = Nonlinearity::cutoff_exp(20);
  const double v_pe = check_fprime_F_limit(pe, {ao.u_max}).front().second;
  const double v_cut = check_fprime_F_limit(cut, {ao.u_max}).front().second;
  double exact = 0.0;
  for (const auto& [u, v] : check_fprime_F_limit(cut, log_spaced(4.0, ao.u_max, 200))) {
    exact = std::max(exact, std::abs(v - 1.0));
  }
  const bool ok = std::abs(v_pe - 1.0) <= 0.01 && std::abs(v_cut - 1.0) <= 0.01 && exact <= 1e-12;
  return {ok, fmt("f'F at u=%.0e: power-exp %.6f, cutoff-exp %.6f; cutoff |f'F-1| on [4, u_max] <= %.1e",
                  ao.u_max, v_pe, v_cut, exact)};
}

Outcome c4() {
  const bool ex1 = check_admissibility(Nonlinearity::power_exp(5, 2), 3).all_pass();
  const bool ex2 = check_admissibility(Nonlinearity::cutoff_exp(20), 3).all_pass();
  bool sub = true;
  std::string detail = std::string("power-exp(5,2) ") + (ex1 ? "all PASS" : "FAIL") + ", cutoff-exp(20) " +
           (ex2 ? "all PASS" : "FAIL") + "; A4 for u^p below p_S:";
  for (const auto& [p, dim] : std::vector<std::pair<double, int>>{{2, 3}, {3, 3}, {4.5, 3}, {2, 5}}) {
    const bool fails = check_admissibility(Nonlinearity::pure_power(p), dim).condition("A4").verdict ==
                       stlab::Verdict::Fail;
    sub = sub && fails;
    detail += fmt(" p=%g,N=%g", p, dim) + (fails ? " FAIL" : " PASS");
  }
  return {ex1 && ex2 && sub, detail};
}

Outcome c5() {
  double worst = 0.0;
  for (const auto& spec : {Nonlinearity::power_exp(5, 2), Nonlinearity::cutoff_exp(20)}) {
    worst = std::max(worst, verify_flux_identity(table(spec, 3)).max_residual);
  }
  return {worst <= 1e-4, fmt("max relative flux residual over the admissible built-ins: %.2e", worst)};
}

Outcome c6() {
  double slope = -INFINITY;
  bool a4 = true;
  for (const auto& spec : {Nonlinearity::power_exp(5, 2), Nonlinearity::cutoff_exp(20)}) {
    a4 = a4 && check_admissibility(spec, 3).condition("A4").verdict == stlab::Verdict::Pass;
    slope = std::max(slope, trace_pohozaev(table(spec, 3), 40).max_slope);
  }
  const auto crit = trace_pohozaev(table(Nonlinearity::pure_power(5), 3), 40);
  const bool ok = a4 && slope <= 1e-10 && crit.max_slope <= 1e-10 && crit.relative_variation <= 1e-12;
  return {ok, fmt("max dP/dr %.2e (admissible built-ins); u^5 in N=3: slope %.2e, relative variation %.2e",
                  slope, crit.max_slope, crit.relative_variation)};
}

RadialField scaled(RadialField f, double a) {
  for (double& v : f.values) v *= a;
  f.grid.outer_value *= a;
  return f;
}

Outcome c7() {
  const auto spec = Nonlinearity::power_exp(5, 2);
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 63, 1e-2, 0.0);
  const auto us = sample_singular(table(spec, 3), g, 1e4);
  DuhamelMap map(g, spec, 0.1);
  LadderOptions o;
  o.k_max = 6;
  o.stop_on_gap = false;
  const auto below = run_ladder(LadderSeed::FromBelow, scaled(us, 0.9), us, map, o);
  const auto above = run_ladder(LadderSeed::FromAbove, scaled(us, 0.9), us, map, o);
  const double sandwich = sandwich_violation(below, above);
  const double order = std::max(below.ordering_violation_max, above.ordering_violation_max);
  const bool ok = below.iterates.size() == 7 && above.iterates.size() == 7 && sandwich <= 1e-8 && order <= 1e-8;
  return {ok, fmt("%g nodes, 6 iterates per side: max(v_k - w_j) %.1e, ordering violation %.1e, sup at t_obs v6 %.6f",
                  double(g.r.size()), sandwich, order, below.sup_norm.back()) +
                  fmt(" w6 %.6f", above.sup_norm.back())};
}

Outcome c8() {
  const auto spec = Nonlinearity::power_exp(5, 2);
  const auto& tab = table(spec, 3);
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 100, 1e-2, 0.0);
  const auto coarse = fixed_point_residual(sample_singular(tab, g, 1e4), spec, 0.1).l1_ball;
  const auto coarse_cap = fixed_point_residual(sample_singular(tab, g, 1e5), spec, 0.1).l1_ball;
  const auto fine = fixed_point_residual(sample_singular(tab, g.refined(), 1e4), spec, 0.1).l1_ball;
  const double ratio = fine / coarse;
  // First order: the coarse residual is about twice the fine one, plus whatever the cap moves.
  const double predicted = 2.5 * fine + std::abs(coarse_cap - coarse);
  const bool ok = coarse <= predicted && ratio >= 0.375 && ratio <= 0.625;
  return {ok, fmt("L1(B(0,1)) residual of D(u*) - u*: M=100 %.3e, M=200 %.3e, ratio %.3f, predicted bound %.3e",
                  coarse, fine, ratio, predicted)};
}

std::string verdicts(const ScanReport& rep) {
  std::string s;
  for (auto c : rep.classifications()) s += (s.empty() ? "" : ",") + to_string(c);
  return s;
}

Outcome c9() {
  const auto spec = Nonlinearity::power_exp(5, 2);
  const auto& tab = table(spec, 3);
  const std::vector<double> factors{-0.3, -0.1, 0.1, 0.3};
  const std::vector<double> caps{1e4, 1e5};
  const std::vector<Classification> want{Classification::GlobalBounded, Classification::GlobalBounded,
                                         Classification::BlowUp, Classification::BlowUp};
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 200, 1e-2, 0.0);
  bool ok = true;
  std::string detail;
  for (const auto& grid : {g, g.refined()}) {
    const auto rep = threshold_scan(spec, tab, grid, 2.0, 0.3, factors, caps);
    bool stable = true;
    for (const auto& row : rep.rows) stable = stable && row.report.cap_stable;
    ok = ok && rep.classifications() == want && stable;
    if (!detail.empty()) detail += "; ";
    detail += fmt("M=%g: ", grid.M()) + verdicts(rep) + (stable ? " (cap-stable)" : " (caps disagree)");
  }
  return {ok, detail};
}

Outcome c10() {
  const auto spec = Nonlinearity::power_exp(5, 2);
  EvolutionOptions o;
  o.reaction = false;
  const auto rep = threshold_scan(spec, table(spec, 3), RadialGrid::geometric_uniform(3, 10.0, 200, 1e-2, 0.0),
                                  2.0, 0.3, {-0.3, -0.1, 0.1, 0.3}, {1e4, 1e5}, o);
  bool ok = true;
  for (auto c : rep.classifications()) ok = ok && c == Classification::GlobalBounded;
  return {ok, "reaction off: " + verdicts(rep)};
}

Outcome c11() {
  auto one = RadialField::constant(RadialGrid::geometric_uniform(3, 10.0, 200, 1e-2, 0.0), 1.0);
  const double w1 = ul_norm(one, 1.0).window_integral;
  const double err1 = std::abs(w1 - 4.0 * M_PI / 3.0);

  const auto& tab = table(Nonlinearity::pure_power(3), 5);
  const auto g = RadialGrid::geometric_uniform(5, 10.0, 400, 1e-8, 0.0);
  std::vector<double> l1, w5;
  for (double cap : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    auto f = sample_singular(tab, g, cap);
    f.grid.bc = OuterBC::Neumann;
    l1.push_back(ul_norm(f, 1.0).value);
    w5.push_back(window_integral(f, 5.0, 0.0));
  }
  double spread = 0.0;
  bool growing = true;
  for (std::size_t k = 1; k < l1.size(); ++k) {
    spread = std::max(spread, std::abs(l1[k] - l1[0]) / l1[0]);
    // Each decade of cap adds |S^4| 4 sqrt(2) ln 10 to the L5 window.
    growing = growing && w5[k] - w5[k - 1] > 0.98 * (8 * M_PI * M_PI / 3) * 4 * std::sqrt(2.0) * std::log(10.0);
  }
  const bool ok = err1 <= 1e-6 && spread <= 1e-6 && growing;
  return {ok, fmt("|window(1) - 4pi/3| %.1e; L1_ul of capped u* spread %.1e over caps 1e2..1e6; L5 window %.1f -> %.1f",
                  err1, spread, w5.front(), w5.back()) +
                  (growing ? " (log growth per decade)" : " (not growing)")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "closed-form oracle u^3, N=5", 5, c1},
      {2, "asymptotic ratio power-exp(5,2), N=3", 30, c2},
      {3, "f'F limit", 5, c3},
      {4, "admissibility suite", 5, c4},
      {5, "flux identity", 10, c5},
      {6, "Pohozaev monotonicity", 5, c6},
      {7, "monotone ladder sandwich", 60, c7},
      {8, "stationarity fixed point", 60, c8},
      {9, "threshold dichotomy", 600, c9},
      {10, "control without reaction", 60, c10},
      {11, "uniformly local norms", 60, c11},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = v.pass && s <= c.limit_s;
    failed += pass ? 0 : 1;
    std::printf("%s  %2d %s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), s,
                c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
