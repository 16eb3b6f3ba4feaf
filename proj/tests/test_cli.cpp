#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "stlab/cli.hpp"
#include "stlab/errors.hpp"

using namespace stlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("stlab_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text: sections, comments, overrides") {
  RunConfig cfg;
  cfg.load_text("# lab run\n[nonlinearity]\nfamily = pure-power\np = 3   ; cubic\n\n[domain]\ndim=5\n");
  CHECK(cfg.text("nonlinearity.family") == "pure-power");
  CHECK(cfg.number("nonlinearity.p") == 3.0);
  CHECK(cfg.dim() == 5);
  CHECK(cfg.number("domain.R_outer") == 10.0);
  cfg.set("solver.caps", "1e3, 1e4,1e5");
  CHECK(cfg.numbers("solver.caps") == std::vector<double>{1e3, 1e4, 1e5});
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.nonlinearity().descriptor() == "pure-power(p=3)");
  CHECK(cfg.to_json()["domain"]["dim"] == "5");
}

TEST_CASE("config errors name the offending key") {
  RunConfig cfg;
  auto message = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message([&] { cfg.load_text("[solver]\ntolerance = 3\n"); }).find("solver.tolerance") != std::string::npos);
  CHECK(message([&] { cfg.load_text("p = 3\n"); }).find("outside any section") != std::string::npos);
  CHECK(message([&] { cfg.load_text("[domain]\nM\n"); }).find("key = value") != std::string::npos);

  RunConfig bad;
  bad.set("domain.M", "12x");
  CHECK(message([&] { bad.validate(); }).find("domain.M") != std::string::npos);
  RunConfig low;
  low.set("nonlinearity.p", "4");
  CHECK(message([&] { low.validate(); }).find("nonlinearity.p") != std::string::npos);
  RunConfig flat;
  flat.set("domain.dim", "2");
  CHECK(message([&] { flat.validate(); }).find("domain.dim") != std::string::npos);
  RunConfig tol;
  tol.set("solver.ode_tol", "0");
  CHECK(message([&] { tol.validate(); }).find("solver.ode_tol") != std::string::npos);
  RunConfig yesno;
  yesno.set("solver.reaction", "maybe");
  CHECK(message([&] { yesno.validate(); }).find("solver.reaction") != std::string::npos);
}

TEST_CASE("artifacts stay .partial until committed") {
  const auto dir = scratch("artifacts");
  ArtifactSet art(dir);
  { std::ofstream(art.path("a.csv")) << "x\n1\n"; }
  art.write_json("b.json", {{"k", 1}});
  CHECK(fs::exists(dir / "a.csv.partial"));
  CHECK_FALSE(fs::exists(dir / "a.csv"));
  art.commit();
  CHECK(fs::exists(dir / "a.csv"));
  CHECK(fs::exists(dir / "b.json"));
  CHECK_FALSE(fs::exists(dir / "b.json.partial"));
  fs::remove_all(dir);
}

TEST_CASE("check: exit codes follow the verdicts and config errors") {
  const auto dir = scratch("check");
  RunOptions o;
  o.out_dir = dir;
  o.timestamped = false;
  std::ostringstream out, err;

  RunConfig pe;
  CHECK(run_command("check", pe, o, out, err) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "admissibility.json"));
  CHECK(j["config"]["nonlinearity"]["family"] == "power-exp");
  CHECK(j["result"]["all_pass"] == true);

  RunConfig square;
  square.set("nonlinearity.family", "pure-power");
  square.set("nonlinearity.p", "2");
  CHECK(run_command("check", square, o, out, err) == 1);

  RunConfig broken;
  broken.set("domain.M", "many");
  CHECK(run_command("check", broken, o, out, err) == 2);
  CHECK(err.str().find("domain.M") != std::string::npos);
  CHECK(run_command("plot", pe, o, out, err) == 2);

  RunOptions stamped;
  stamped.out_dir = dir;
  const auto a = make_run_dir(stamped, "scan");
  CHECK(a.parent_path() == dir);
  CHECK(a.filename().string().rfind("scan-", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("iterate writes identical bytes for identical configs") {
  RunConfig cfg;
  cfg.set("domain.M", "32");
  cfg.set("solver.k_max", "4");
  cfg.set("solver.slices", "8");
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const auto dir = scratch("iterate" + std::to_string(run));
    RunOptions o;
    o.out_dir = dir;
    o.timestamped = false;
    std::ostringstream out, err;
    REQUIRE(run_command("iterate", cfg, o, out, err) == 0);
    const auto csv = slurp(dir / "iterates.csv");
    CHECK(csv.rfind("k,r,v_k,w_k\n", 0) == 0);
    if (run == 0) first = csv;
    else CHECK(csv == first);
    const auto j = nlohmann::json::parse(slurp(dir / "ladder.json"));
    CHECK(j["result"]["sandwich_violation"].get<double>() <= 1e-8);
    CHECK(j["result"]["below"]["k"] == 4);
    fs::remove_all(dir);
  }
}

TEST_CASE("evolve without reaction is always bounded") {
  RunConfig cfg;
  cfg.set("domain.M", "60");
  cfg.set("solver.reaction", "false");
  cfg.set("experiment.amplitude", "0.5");
  cfg.set("solver.caps", "1e4");
  const auto dir = scratch("evolve");
  RunOptions o;
  o.out_dir = dir;
  o.timestamped = false;
  std::ostringstream out, err;
  REQUIRE(run_command("evolve", cfg, o, out, err) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "evolve.json"));
  CHECK(j["result"]["classification"] == "GlobalBounded");
  CHECK(slurp(dir / "norms_cap0.csv").rfind("t,sup_norm,l1ul_norm,f_mass_inner\n", 0) == 0);
  CHECK(slurp(dir / "snapshots_cap0.csv").rfind("t,r,u\n", 0) == 0);
  fs::remove_all(dir);
}
