#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "stlab/admissibility.hpp"
#include "stlab/errors.hpp"
#include "stlab/singular_ode.hpp"

using namespace stlab;

namespace {

// Fixed-step RK4 in s = log r for the regular solution, started from the same
// two-term centre expansion but sharing no code with the library integrator.
double oracle_regular(const Nonlinearity& spec, int dim, double alpha, double r0, double r1,
                      int steps) {
  const double fa = spec.f(alpha);
  double s = std::log(r0);
  std::array<double, 2> y{alpha - fa * r0 * r0 / (2.0 * dim), -fa * r0 * r0 / dim};
  auto rhs = [&](double ss, const std::array<double, 2>& z) {
    const double src = z[0] > 0.0 ? std::exp(2.0 * ss) * spec.f(z[0]) : 0.0;
    return std::array<double, 2>{z[1], -(dim - 2.0) * z[1] - src};
  };
  const double h = (std::log(r1) - s) / steps;
  for (int i = 0; i < steps; ++i) {
    const auto k1 = rhs(s, y);
    const auto k2 = rhs(s + h / 2, {y[0] + h / 2 * k1[0], y[1] + h / 2 * k1[1]});
    const auto k3 = rhs(s + h / 2, {y[0] + h / 2 * k2[0], y[1] + h / 2 * k2[1]});
    const auto k4 = rhs(s + h, {y[0] + h * k3[0], y[1] + h * k3[1]});
    for (int j = 0; j < 2; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    s += h;
  }
  return y[0];
}

double max_ratio_deviation(const SingularSolutionTable& t) {
  double worst = 0.0;
  for (const auto& [r, v] : asymptotic_ratio(t, t.r.front(), 10.0 * t.r.front())) {
    worst = std::max(worst, std::abs(v - 1.0));
  }
  return worst;
}

}  // namespace

TEST_CASE("pure power u^3 in five dimensions reproduces sqrt(2)/r") {
  const auto spec = Nonlinearity::pure_power(3);
  const auto t = build_singular(spec, 5);
  double worst = 0.0;
  double worst_du = 0.0;
  for (std::size_t i = 0; i < t.r.size(); ++i) {
    const double r = t.r[i];
    if (r < 1e-2 || r > 1.0) continue;
    const double exact = std::sqrt(2.0) / r;
    worst = std::max(worst, std::abs(t.u[i] - exact) / exact);
    worst_du = std::max(worst_du, std::abs(t.du[i] + exact / r) / (exact / r));
  }
  CHECK(worst <= 1e-3);
  CHECK(worst <= 1e-9);
  CHECK(worst_du <= 1e-9);
  CHECK(t.value(0.3) == doctest::Approx(std::sqrt(2.0) / 0.3).epsilon(1e-9));
  // Below r_patch the kappa-corrected patch is exact for a pure power.
  CHECK(t.value(1e-5) == doctest::Approx(std::sqrt(2.0) / 1e-5).epsilon(1e-12));
  CHECK(t.patch_mismatch.value() < 1e-10);
}

TEST_CASE("table invariants: positive, decreasing, end at R_max") {
  for (const auto& [spec, dim] : std::vector<std::pair<Nonlinearity, int>>{
           {Nonlinearity::power_exp(5, 2), 3}, {Nonlinearity::cutoff_exp(20), 3}}) {
    CAPTURE(spec.descriptor());
    const auto t = build_singular(spec, dim);
    CHECK(t.reached_R_max);
    CHECK(t.r.back() == 10.0);
    CHECK(t.r.front() > t.r_patch);
    for (std::size_t i = 0; i < t.r.size(); ++i) {
      CHECK(t.u[i] > 0.0);
      CHECK(t.du[i] < 0.0);
      if (i > 0) {
        CHECK(t.r[i] > t.r[i - 1]);
        CHECK(t.u[i] < t.u[i - 1]);
      }
    }
    CHECK(ode_residual(spec, dim, t.r, t.u) <= 1e-6);
  }
}

TEST_CASE("asymptotic ratio near the origin for power-exp tightens as the patch shrinks") {
  const auto spec = Nonlinearity::power_exp(5, 2);
  std::vector<double> dev;
  for (double rp : {1e-3, 1e-5, 1e-7}) {
    SingularOptions o;
    o.r_patch = rp;
    const auto t = build_singular(spec, 3, o);
    for (const auto& [r, v] : asymptotic_ratio(t, t.r.front(), 10.0 * t.r.front())) {
      CHECK(v >= 0.95);
      CHECK(v <= 1.05);
    }
    dev.push_back(max_ratio_deviation(t));
  }
  CHECK(dev[1] < dev[0]);
  CHECK(dev[2] < dev[1]);
}

TEST_CASE("flux identity holds for the built-in families") {
  for (const auto& [spec, dim] : std::vector<std::pair<Nonlinearity, int>>{
           {Nonlinearity::power_exp(5, 2), 3},
           {Nonlinearity::cutoff_exp(20), 3},
           {Nonlinearity::pure_power(3), 5}}) {
    CAPTURE(spec.descriptor());
    const auto t = build_singular(spec, dim);
    const auto rep = verify_flux_identity(t);
    CHECK(rep.max_residual <= 1e-4);
    CHECK(rep.residual_at_patch <= 1e-5);
  }
  // f(u*) s^4 = 2 sqrt(2) s, so both sides equal sqrt(2) r^2.
  const auto t = build_singular(Nonlinearity::pure_power(3), 5);
  CHECK(t.patch_flux == doctest::Approx(std::sqrt(2.0) * t.r_patch * t.r_patch).epsilon(1e-10));
}

TEST_CASE("Pohozaev functional is non-increasing and constant at the Sobolev exponent") {
  for (const auto& [spec, dim] : std::vector<std::pair<Nonlinearity, int>>{
           {Nonlinearity::power_exp(5, 2), 3},
           {Nonlinearity::cutoff_exp(20), 3},
           {Nonlinearity::pure_power(7), 3}}) {
    CAPTURE(spec.descriptor());
    REQUIRE(check_admissibility(spec, dim).condition("A4").verdict == Verdict::Pass);
    const auto tr = trace_pohozaev(build_singular(spec, dim), 40);
    CHECK(tr.max_slope <= 1e-10);
  }
  {
    const auto tr = trace_pohozaev(build_singular(Nonlinearity::pure_power(5), 3), 40);
    CHECK(tr.max_slope <= 1e-10);
    CHECK(tr.relative_variation <= 1e-12);
    // u* = L r^{-1/2} with L^4 = 1/4; each term of P is r-independent.
    const double L = std::pow(0.25, 0.25);
    const double P = 0.125 * L * L + std::pow(L, 6) / 6.0 - 0.25 * L * L;
    CHECK(tr.P_at_patch == doctest::Approx(P).epsilon(1e-10));
  }
  {
    // Five dimensions: the difference quotient only resolves constancy in relative terms.
    const auto tr = trace_pohozaev(build_singular(Nonlinearity::pure_power(7.0 / 3.0), 5), 40);
    CHECK(tr.relative_variation <= 1e-12);
    CHECK(tr.max_relative_slope <= 1e-10);
  }
  const auto spec = Nonlinearity::power_exp(5, 2);
  double prev = INFINITY;
  for (double rp : {1e-2, 1e-3, 1e-4}) {
    SingularOptions o;
    o.r_patch = rp;
    const double p0 = std::abs(trace_pohozaev(build_singular(spec, 3, o), 40).P_at_patch);
    CHECK(p0 < prev);
    prev = p0;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("the plain asymptotic seed fails the re-seeding check") {
  SingularOptions o;
  o.patch = PatchMethod::Asymptotic;
  CHECK_THROWS_AS(build_singular(Nonlinearity::power_exp(5, 2), 3, o), PatchMismatch);
  CHECK_THROWS_AS(build_singular(Nonlinearity::pure_power(3), 5, o), PatchMismatch);
  o.patch_tol = 1e-2;
  const auto t = build_singular(Nonlinearity::power_exp(5, 2), 3, o);
  CHECK(*t.patch_mismatch > 1e-5);
  CHECK(*t.patch_mismatch < 1e-2);

  CHECK(patch_method_from_string("refined") == PatchMethod::Refined);
  CHECK(patch_method_from_string("kappa") ==
        PatchMethod::KappaCorrected);
  CHECK_THROWS_AS(patch_method_from_string("taylor"), ConfigError);
}

TEST_CASE("seed derivative follows the chain rule and the kappa seed is exact for powers") {
  const auto spec = Nonlinearity::pure_power(3);
  const double r = 1e-3;
  const auto plain = patch_seed(spec, 5, r, PatchMethod::Asymptotic);
  CHECK(plain.v == doctest::Approx(-r * r * spec.f(plain.u) / 3.0).epsilon(1e-14));
  const auto kc = patch_seed(spec, 5, r, PatchMethod::KappaCorrected);
  CHECK(kc.u == doctest::Approx(std::sqrt(2.0) / r).epsilon(1e-12));
  CHECK(kc.v == doctest::Approx(-std::sqrt(2.0) / r).epsilon(1e-12));
  CHECK(kc.kappa == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("growth bounds near the origin") {
  const auto t = build_singular(Nonlinearity::power_exp(5, 2), 3);
  const auto rep = verify_growth_bounds(t, 0.1);
  for (const auto& c : rep.checks) {
    CAPTURE(c.name);
    CHECK(c.holds);
  }
  CHECK(rep.gamma0 < 1.0);
  CHECK(rep.check("u_upper").slope < 2 * 0.1);
  CHECK(rep.to_json()["checks"].size() == 6);
  CHECK_THROWS_AS(verify_growth_bounds(t, 0.6), std::invalid_argument);

  // Pure exponential regime of the cutoff needs u* - delta >= 4, i.e. r below 1e-19.
  SingularOptions o;
  o.r_patch = 1e-21;
  o.samples_per_decade = 200;
  o.check_patch = false;
  const auto tc = build_singular(Nonlinearity::cutoff_exp(20), 3, o);
  REQUIRE(tc.u.front() > 4.1);
  const auto rc = verify_growth_bounds(tc, 0.1);
  CHECK(rc.gamma0 == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
  CHECK(rc.check("f_gamma1_0.9").holds);
}

TEST_CASE("halving the tolerance moves u*(R_max) by less than ten error estimates") {
  for (const auto& [spec, dim] : std::vector<std::pair<Nonlinearity, int>>{
           {Nonlinearity::power_exp(5, 2), 3}, {Nonlinearity::pure_power(3), 5}}) {
    SingularOptions o;
    const auto a = build_singular(spec, dim, o);
    o.tol.abs_tol *= 0.5;
    o.tol.rel_tol *= 0.5;
    const auto b = build_singular(spec, dim, o);
    CHECK(std::abs(a.u.back() - b.u.back()) <= 10.0 * a.error_estimate);
  }
}

TEST_CASE("CSV and sidecar round trip") {
  const auto t = build_singular(Nonlinearity::pure_power(3), 5);
  const auto path = (std::filesystem::temp_directory_path() / "stlab_singular_test.csv").string();
  t.write_csv(path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,u_star,du_star");
  std::size_t rows = 0;
  double r = 0, u = 0, du = 0;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    is >> r >> u >> du;
    if (rows == 0) {
      CHECK(r == t.r.front());
      CHECK(u == t.u.front());
      CHECK(du == t.du.front());
    }
    ++rows;
  }
  CHECK(rows == t.r.size());
  CHECK(u == t.u.back());
  std::filesystem::remove(path);

  const auto j = t.sidecar();
  CHECK(j["N"] == 5);
  CHECK(j["r_patch"] == 1e-3);
  CHECK(j["R_max"] == 10.0);
  CHECK(j["spec_descriptor"] == "pure-power(p=3)");
  CHECK(j.contains("tolerances"));
}

TEST_CASE("regular solutions") {
  const auto spec = Nonlinearity::pure_power(3);
  const auto zero = integrate_regular(spec, 5, 0.0, 2.0);
  CHECK(zero.reached_R_max());
  for (double v : zero.u) CHECK(v == 0.0);

  const auto sol = integrate_regular(spec, 5, 10.0, 10.0);
  CHECK(sol.u.front() == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(sol.du.front() <= 0.0);
  CHECK(sol.du.front() > -1e-3);
  CHECK(sol.u[1] < 10.0);
  CHECK(sol.reached_R_max());
  CHECK(sol.r.back() == 10.0);
  CHECK(ode_residual(spec, 5, sol.r, sol.u) <= 1e-6);

  const auto half = integrate_regular(spec, 5, 10.0, 0.5);
  const double oracle = oracle_regular(spec, 5, 10.0, 1e-7, 0.5, 200000);
  CHECK(half.u.back() == doctest::Approx(oracle).epsilon(1e-8));

  const auto pe = Nonlinearity::power_exp(5, 2);
  for (double alpha : {1.0, 3.0, 5.0}) {
    CAPTURE(alpha);
    const auto s = integrate_regular(pe, 3, alpha, 10.0);
    CHECK(ode_residual(pe, 3, s.r, s.u) <= 1e-6);
  }
  CHECK_THROWS_AS(integrate_regular(spec, 2, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("a small regular solution vanishes in the subcritical case") {
  // u^2 in three dimensions is below the Serrin exponent, so every regular
  // solution has a zero.
  const auto spec = Nonlinearity::pure_power(2);
  const auto sol = integrate_regular(spec, 3, 1.0, 100.0);
  REQUIRE(sol.vanished_at.has_value());
  CHECK(sol.u.back() == 0.0);
  CHECK(*sol.vanished_at > 1.0);
  CHECK(*sol.vanished_at < 100.0);
}

TEST_CASE("shooting approaches u* but oscillates around it below ten dimensions") {
  const auto spec = Nonlinearity::pure_power(3);
  const double target = std::sqrt(2.0) / 0.5;
  std::vector<double> gap;
  for (double alpha : {10.0, 20.0, 40.0, 80.0, 160.0, 640.0}) {
    const auto s = integrate_regular(spec, 5, alpha, 0.5);
    gap.push_back(s.u.back() - target);
  }
  // Frozen from the RK4 oracle above at alpha = 10.
  CHECK(gap[0] + target == doctest::Approx(3.179159990).epsilon(1e-8));
  int sign_changes = 0;
  for (std::size_t i = 1; i < gap.size(); ++i) sign_changes += (gap[i] > 0) != (gap[i - 1] > 0);
  CHECK(sign_changes >= 2);
  CHECK(std::abs(gap.back()) < std::abs(gap.front()));

  const auto t = build_singular(spec, 5);
  const auto cc = cross_check_regular(t);
  CHECK(cc.alpha == doctest::Approx(2.0 * t.seed.u));
  CHECK(cc.sign_changes > 0);
  CHECK_FALSE(cc.stays_below());
}
