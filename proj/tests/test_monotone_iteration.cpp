#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "stlab/errors.hpp"
#include "stlab/monotone_iteration.hpp"

using namespace stlab;

namespace {

const Nonlinearity& pe() {
  static const Nonlinearity s = Nonlinearity::power_exp(5, 2);
  return s;
}

const SingularSolutionTable& pe_table() {
  static const SingularSolutionTable t = build_singular(pe(), 3);
  return t;
}

RadialField scaled(RadialField f, double a) {
  for (double& v : f.values) v *= a;
  f.grid.outer_value *= a;
  return f;
}

}  // namespace

TEST_CASE("trajectories interpolate linearly in time and refuse to extrapolate") {
  const auto g = RadialGrid::uniform(3, 1.0, 4);
  Trajectory tr;
  tr.grid = g;
  tr.times = {0.0, 1.0};
  tr.values = {std::vector<double>(5, 1.0), std::vector<double>(5, 3.0)};
  CHECK(tr.at(0.25)[2] == doctest::Approx(1.5));
  CHECK(tr.final_field().values[0] == 3.0);
  CHECK_THROWS_AS(tr.at(1.5), TimeMeshMismatch);
  CHECK_THROWS_AS(tr.at(-0.1), TimeMeshMismatch);

  const auto us = sample_singular(pe_table(), RadialGrid::geometric_uniform(3, 10.0, 32, 1e-2, 0.0), 1e4);
  CHECK_THROWS_AS(duhamel_map(stationary_trajectory(us, 0.05), us, pe(), 0.1), TimeMeshMismatch);
}

TEST_CASE("the map sends the zero trajectory with zero data to zero") {
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 32, 1e-2, 0.0);
  const auto zero = RadialField::constant(g, 0.0);
  DuhamelOptions o;
  o.slices = 8;
  const auto out = duhamel_map(stationary_trajectory(zero, 0.1), zero, pe(), 0.1, o);
  for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("first iterate from below is the heat flow of data under u*, and stays under u*") {
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 48, 1e-2, 0.0);
  const auto us = sample_singular(pe_table(), g, 1e4);
  const auto u0 = scaled(us, 0.95);
  DuhamelOptions o;
  o.slices = 16;
  DuhamelMap map(g, pe(), 0.1, o);
  auto zero = us;
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  Trajectory prev;
  prev.grid = g;
  prev.times = map.slice_times();
  prev.values.assign(prev.times.size(), zero.values);
  const auto tr = map.apply(prev, u0);
  HeatSemigroup S(g);
  for (std::size_t k = 1; k < tr.times.size(); ++k) {
    const auto heat = S.apply(u0, tr.times[k]);
    for (std::size_t i = 0; i < g.r.size(); ++i) {
      CHECK(tr.values[k][i] == doctest::Approx(heat.values[i]).epsilon(1e-12));
      CHECK(tr.values[k][i] <= us.values[i] * (1 + 1e-9));
    }
  }
}

TEST_CASE("ladders from both sides are monotone in k and sandwich each other") {
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 64, 1e-2, 0.0);
  const auto us = sample_singular(pe_table(), g, 1e4);
  const auto u0 = scaled(us, 0.9);
  DuhamelMap map(g, pe(), 0.1);
  LadderOptions o;
  o.k_max = 6;
  o.stop_on_gap = false;
  const auto below = run_ladder(LadderSeed::FromBelow, u0, us, map, o);
  const auto above = run_ladder(LadderSeed::FromAbove, u0, us, map, o);
  REQUIRE(below.iterates.size() == 7);
  REQUIRE(above.iterates.size() == 7);
  CHECK(below.ordering_violation_max <= 1e-8);
  CHECK(above.ordering_violation_max <= 1e-8);
  CHECK(sandwich_violation(below, above) <= 1e-8);
  for (std::size_t k = 1; k < 7; ++k) {
    CHECK(below.sup_norm[k] >= below.sup_norm[k - 1] - 1e-12);
    CHECK(above.sup_norm[k] <= above.sup_norm[k - 1] + 1e-12);
  }
  // Both ladders close in on the same solution at t_obs.
  CHECK(above.sup_norm[6] - below.sup_norm[6] < 1e-3);
  CHECK(below.sup_norm[6] == doctest::Approx(0.76715).epsilon(1e-3));
  const auto est = limit_estimate(below);
  CHECK(est.iterations == 6);
  CHECK(est.gaps_decreasing);
  CHECK(est.cauchy_gap < 1e-4);

  const auto j = below.to_json();
  for (const char* key : {"seed", "t_obs", "k", "sup_norm_per_iterate", "cauchy_gaps", "ordering_violation_max"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["seed"] == "from_below");
  CHECK(j["k"] == 6);

  const auto rep = check_immediate_boundedness(above, pe(), 0.05, 0.1);
  CHECK(rep.finite);
  CHECK(rep.exponent == doctest::Approx(1.6));
  CHECK(rep.sup_w4 < 2.0);
  CHECK_THROWS_AS(check_immediate_boundedness(below, pe(), 0.05, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(check_immediate_boundedness(above, pe(), 0.2, 0.3), TimeMeshMismatch);
}

TEST_CASE("immediate boundedness does not depend on the cap") {
  std::vector<BoundednessReport> reps;
  for (double cap : {1e4, 1e5}) {
    const auto g = RadialGrid::geometric_uniform(3, 10.0, 48, 1e-2, 0.0);
    const auto us = sample_singular(pe_table(), g, cap);
    // With u0 = u* the first step from above already overshoots by the
    // near-origin discretization residual.
    const auto u0 = scaled(us, 0.9);
    LadderOptions o;
    o.k_max = 4;
    o.stop_on_gap = false;
    o.duhamel.slices = 32;
    const auto above = run_ladder(LadderSeed::FromAbove, u0, us, pe(), 0.2, o);
    reps.push_back(check_immediate_boundedness(above, pe(), 0.05, 0.2));
  }
  CHECK(reps[0].finite);
  CHECK(reps[1].sup_w4 == doctest::Approx(reps[0].sup_w4).epsilon(1e-9));
  CHECK(reps[1].f_w3_ul_norm == doctest::Approx(reps[0].f_w3_ul_norm).epsilon(1e-9));
}

TEST_CASE("zero data: the ladder from below stays at zero") {
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 32, 1e-2, 0.0);
  const auto us = sample_singular(pe_table(), g, 1e4);
  const auto zero = scaled(us, 0.0);
  LadderOptions o;
  o.duhamel.slices = 8;
  const auto below = run_ladder(LadderSeed::FromBelow, zero, us, pe(), 0.1, o);
  CHECK(below.iterates.size() == 2);
  CHECK(below.cauchy_gaps[0] == 0.0);
  CHECK(below.sup_norm.back() == 0.0);
}

TEST_CASE("data above u* is rejected") {
  const auto g = RadialGrid::geometric_uniform(3, 10.0, 32, 1e-2, 0.0);
  const auto us = sample_singular(pe_table(), g, 1e4);
  CHECK_THROWS_AS(run_ladder(LadderSeed::FromBelow, scaled(us, 1.1), us, pe(), 0.1), std::invalid_argument);
}

TEST_CASE("u* is a fixed point up to a first-order discretization residual") {
  auto g = RadialGrid::geometric_uniform(3, 10.0, 100, 1e-2, 0.0);
  std::vector<double> res;
  for (int level = 0; level < 2; ++level) {
    const auto us = sample_singular(pe_table(), g, 1e4);
    res.push_back(fixed_point_residual(us, pe(), 0.1).l1_ball);
    g = g.refined();
  }
  CHECK(res[0] < 3e-3);
  CHECK(res[1] / res[0] == doctest::Approx(0.5).epsilon(0.25));
}
