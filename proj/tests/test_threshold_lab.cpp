#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "stlab/errors.hpp"
#include "stlab/threshold_lab.hpp"

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

RadialGrid coarse() { return RadialGrid::geometric_uniform(3, 10.0, 100, 1e-2, 0.0); }

}  // namespace

TEST_CASE("perturbations act on uncapped u* and report their side") {
  const auto g = coarse();
  CHECK(make_initial_data(pe_table(), g, PerturbationSpec::bump(2, 0.3, -0.1), 1e4).side == Side::Below);
  CHECK(make_initial_data(pe_table(), g, PerturbationSpec::bump(2, 0.3, 0.1), 1e4).side == Side::Above);
  CHECK(make_initial_data(pe_table(), g, PerturbationSpec::scaling(1.0), 1e4).side == Side::Neutral);
  const auto mixed = PerturbationSpec::scaling(1.1).then(PerturbationSpec::truncation(3.0));
  CHECK(make_initial_data(pe_table(), g, mixed, 1e4).side == Side::Mixed);
  CHECK(mixed.steps.size() == 2);

  const auto d = make_initial_data(pe_table(), g, PerturbationSpec::bump(2, 0.3, -100.0), 1e4);
  for (double v : d.u0.values) CHECK(v >= 0.0);
  CHECK(d.u0.values.back() == d.ustar.values.back());

  const auto t = make_initial_data(pe_table(), g, PerturbationSpec::truncation(2.0), 1e4);
  CHECK(t.u0.sup() == 2.0);
  const double peak = pe_table().value(2.0) + 0.25;
  const auto b = make_initial_data(pe_table(), g, PerturbationSpec::bump(2, 0.3, 0.25), 1e4);
  CHECK(b.u0.at(2.0) == doctest::Approx(peak).epsilon(0.02));

  CHECK_THROWS_AS(PerturbationSpec::bump(2, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PerturbationSpec::scaling(-1.0), std::invalid_argument);
  const auto j = mixed.to_json();
  CHECK(j.is_array());
  CHECK_FALSE(mixed.describe().empty());
}

TEST_CASE("amplification probe sees the scaling factor at time zero") {
  const auto g = coarse();
  const auto d = make_initial_data(pe_table(), g, PerturbationSpec::scaling(1.2), 1e4);
  EvolutionOptions o;
  o.T = 1e-3;
  o.snapshots = 4;
  const auto out = evolve(d, pe(), o);
  const auto probe = amplification_probe(out, d.ustar_raw);
  REQUIRE_FALSE(probe.empty());
  CHECK(probe.front().t == 0.0);
  CHECK(probe.front().alpha == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("truncated u* decays, a bump above u* blows up, whatever the cap") {
  const auto g = coarse();
  const std::vector<double> caps{1e4, 1e5};
  const auto down = run_case(pe(), pe_table(), g, PerturbationSpec::truncation(1.0), caps);
  CHECK(down.side == Side::Below);
  CHECK(down.classification == Classification::GlobalBounded);
  CHECK(down.cap_stable);
  for (const auto& o : down.per_cap) {
    // Data below u* stay below it.
    CHECK(o.above_ustar_max <= 1e-6);
    CHECK(o.series.back().sup < o.series.front().sup);
  }

  const auto up = run_case(pe(), pe_table(), g, PerturbationSpec::bump(2, 0.3, 0.2), caps);
  CHECK(up.side == Side::Above);
  CHECK(up.classification == Classification::BlowUp);
  CHECK(up.cap_stable);
  CHECK(up.t_detect_monotone);
  for (const auto& o : up.per_cap) {
    CHECK(std::isfinite(o.t_detect));
    CHECK(o.t_detect < 0.5);
  }
  const auto j = up.to_json();
  CHECK(j.contains("per_cap"));
}

TEST_CASE("a bump below u* stays bounded") {
  const auto out = evolve(make_initial_data(pe_table(), coarse(), PerturbationSpec::bump(2, 0.3, -0.2), 1e4), pe());
  CHECK(out.classification == Classification::GlobalBounded);
  CHECK(out.above_ustar_max <= 1e-6);
  CHECK(out.t_end == doctest::Approx(0.5));
  CHECK(out.snapshots.size() == out.snapshot_times.size());
}

TEST_CASE("without reaction everything is heat flow and stays bounded") {
  EvolutionOptions o;
  o.reaction = false;
  const auto out = evolve(make_initial_data(pe_table(), coarse(), PerturbationSpec::bump(2, 0.3, 0.5), 1e4), pe(), o);
  CHECK(out.classification == Classification::GlobalBounded);
  for (std::size_t k = 1; k < out.series.size(); ++k) {
    CHECK(out.series[k].sup <= out.series[k - 1].sup * (1 + 1e-12));
  }
}

TEST_CASE("threshold scan orders the verdicts and writes its CSV") {
  const auto rep = threshold_scan(pe(), pe_table(), coarse(), 2.0, 0.3, {0.3, -0.3}, {1e4});
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].factor == -0.3);
  CHECK(rep.classifications() ==
        std::vector<Classification>{Classification::GlobalBounded, Classification::BlowUp});
  CHECK(rep.a_lower < rep.a_upper);
  CHECK(rep.ustar_rc == doctest::Approx(pe_table().value(2.0)));

  const auto path = (std::filesystem::temp_directory_path() / "stlab_scan_test.csv").string();
  rep.write_csv(path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "amplitude,classification,t_detect,cap,sup_final,reaction_mass_final");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(threshold_scan(pe(), pe_table(), coarse(), 2.0, 0.3, {}, {1e4}), std::invalid_argument);
}
