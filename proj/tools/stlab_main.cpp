#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stlab/cli.hpp"
#include "stlab/errors.hpp"

namespace {

struct Overrides {
  std::vector<std::pair<std::string, std::string>> items;

  // Flag value -> config key, applied after the config file.
  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { items.emplace_back(key, v); }, help);
  }
};

void add_family_options(CLI::App* sub, Overrides& ov) {
  ov.bind<std::string>(sub, "--family", "nonlinearity.family", "power-exp, pure-power or cutoff-exp");
  ov.bind<double>(sub, "--p", "nonlinearity.p", "power exponent");
  ov.bind<double>(sub, "--q", "nonlinearity.q", "exponent inside exp (power-exp)");
  ov.bind<double>(sub, "--a", "nonlinearity.a", "rate (cutoff-exp)");
  ov.bind<double>(sub, "--R-outer", "domain.R_outer", "outer radius");
  ov.bind<int>(sub, "--M", "domain.M", "number of radial cells");
  ov.bind<double>(sub, "--r1", "domain.r1", "first radial node");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singular stationary solutions and the threshold property of u_t = Lap u + f(u)"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "stlab-runs";
  std::optional<int> dim;
  bool verbose = false;
  bool no_timestamp = false;
  std::vector<std::string> sets;
  Overrides ov;
  app.add_option("--config", config_path, "sectioned key=value config file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory collecting the run artifacts");
  app.add_option("--dim", dim, "space dimension N");
  app.add_flag("--verbose,-v", verbose, "progress on stderr");
  app.add_flag("--no-timestamp", no_timestamp, "write into --out-dir itself");
  app.add_option("--set", sets, "override a key: section.key=value (repeatable)");

  std::string report_path;
  auto* check = app.add_subcommand("check", "sampling-based admissibility verdicts");
  add_family_options(check, ov);
  check->add_option("--out", report_path, "extra copy of the report JSON");

  auto* singular = app.add_subcommand("singular", "build and verify the singular solution");
  add_family_options(singular, ov);

  bool pure_heat = false;
  auto* evolve = app.add_subcommand("evolve", "evolve perturbed u* and classify");
  add_family_options(evolve, ov);
  evolve->add_flag("--pure-heat", pure_heat, "switch the reaction off");
  ov.bind<std::string>(evolve, "--perturbation", "experiment.perturbation", "bump, scaling, truncation or none");
  ov.bind<double>(evolve, "--amplitude", "experiment.amplitude", "bump amplitude as a multiple of u*(r_c)");
  ov.bind<double>(evolve, "--theta", "experiment.theta", "scaling factor");
  ov.bind<double>(evolve, "--level", "experiment.level", "truncation level");
  ov.bind<std::string>(evolve, "--caps", "solver.caps", "comma-separated caps");
  ov.bind<double>(evolve, "--T", "solver.T", "horizon");

  auto* iterate = app.add_subcommand("iterate", "monotone Duhamel ladders from both sides");
  add_family_options(iterate, ov);
  ov.bind<int>(iterate, "--k-max", "solver.k_max", "number of iterates");
  ov.bind<double>(iterate, "--t-obs", "experiment.t_obs", "observation time");
  ov.bind<double>(iterate, "--theta", "experiment.theta", "u0 = theta u*");
  ov.bind<int>(iterate, "--slices", "solver.slices", "time slices");

  auto* scan = app.add_subcommand("scan", "bump amplitude scan around u*");
  add_family_options(scan, ov);
  ov.bind<std::string>(scan, "--factors", "experiment.factors", "amplitudes as multiples of u*(r_c)");
  ov.bind<std::string>(scan, "--caps", "solver.caps", "comma-separated caps");
  ov.bind<double>(scan, "--T", "solver.T", "horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  stlab::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [k, v] : ov.items) cfg.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw stlab::ConfigError("--set needs section.key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (dim) cfg.set("domain.dim", std::to_string(*dim));
    if (pure_heat) cfg.set("solver.reaction", "false");
  } catch (const stlab::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  stlab::RunOptions opts;
  opts.out_dir = out_dir;
  opts.timestamped = !no_timestamp;
  opts.report_path = report_path;
  opts.verbose = verbose;
  const auto* sub = app.get_subcommands().front();
  return stlab::run_command(sub->get_name(), cfg, opts, std::cout, std::cerr);
}
