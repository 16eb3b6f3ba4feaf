#include "stlab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "stlab/errors.hpp"

namespace stlab {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("key '" + key + "': '" + raw + "' is not a number");
  }
  return v;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> d{
      {"nonlinearity.family", "power-exp"},
      {"nonlinearity.p", "5"},
      {"nonlinearity.q", "2"},
      {"nonlinearity.a", "20"},
      {"domain.dim", "3"},
      {"domain.R_outer", "10"},
      {"domain.R_max", "10"},
      {"domain.M", "200"},
      {"domain.r1", "0.01"},
      {"domain.growth", "0"},
      {"domain.r_patch", "0.001"},
      {"solver.patch", "refined"},
      {"solver.ode_tol", "1e-13"},
      {"solver.quad_tol", "1e-10"},
      {"solver.division_tol", "1e-14"},
      {"solver.u_min", "1e-6"},
      {"solver.u_max", "1e3"},
      {"solver.n_samples", "2000"},
      {"solver.caps", "1e4,1e5"},
      {"solver.T", "0.5"},
      {"solver.safety", "0.5"},
      {"solver.dt_floor", "1e-14"},
      {"solver.sup_guard", "0"},
      {"solver.mass_growth", "1e6"},
      {"solver.inner_cells", "10"},
      {"solver.transient_fraction", "0.2"},
      {"solver.snapshots", "20"},
      {"solver.reaction", "true"},
      {"solver.balanced", "true"},
      {"solver.slices", "64"},
      {"solver.gl_order", "4"},
      {"solver.k_max", "8"},
      {"solver.ladder_tol", "1e-8"},
      {"experiment.perturbation", "bump"},
      {"experiment.r_c", "2"},
      {"experiment.sigma", "0.3"},
      {"experiment.amplitude", "0.1"},
      {"experiment.theta", "0.9"},
      {"experiment.level", "1"},
      {"experiment.factors", "-0.3,-0.1,0.1,0.3"},
      {"experiment.t_obs", "0.1"},
      {"experiment.bound_t0", "0.05"},
      {"experiment.delta", "0.1"},
      {"experiment.pohozaev_stride", "40"},
  };
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::load_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  load_text(ss.str(), path.string());
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line, section;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(n) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value, got '" + line + "'");
    }
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": key '" + trim(line.substr(0, eq)) +
                        "' outside any section");
    }
    set(section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& dotted, const std::string& value) {
  if (!defaults().count(dotted)) throw ConfigError("unknown key '" + dotted + "'");
  values_[dotted] = trim(value);
}

bool RunConfig::has(const std::string& dotted) const { return values_.count(dotted) > 0; }

std::string RunConfig::text(const std::string& dotted) const {
  const auto it = values_.find(dotted);
  if (it == values_.end()) throw ConfigError("unknown key '" + dotted + "'");
  return it->second;
}

double RunConfig::number(const std::string& dotted) const { return parse_number(dotted, text(dotted)); }

int RunConfig::integer(const std::string& dotted) const {
  const double v = number(dotted);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ConfigError("key '" + dotted + "': '" + text(dotted) + "' is not an integer");
  }
  return static_cast<int>(v);
}

bool RunConfig::flag(const std::string& dotted) const {
  const auto v = text(dotted);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + dotted + "': '" + v + "' is not a boolean");
}

std::vector<double> RunConfig::numbers(const std::string& dotted) const {
  std::vector<double> out;
  std::stringstream ss(text(dotted));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(dotted, item));
  if (out.empty()) throw ConfigError("key '" + dotted + "' is empty");
  return out;
}

void RunConfig::validate() const {
  auto positive = [&](const char* key) {
    if (!(number(key) > 0.0)) throw ConfigError("key '" + std::string(key) + "' must be positive");
  };
  const int N = dim();
  if (N < 3) throw ConfigError("key 'domain.dim' must be at least 3");
  const auto family = text("nonlinearity.family");
  if (family == "power-exp") {
    if (number("nonlinearity.p") < sobolev_exponent(N)) {
      throw ConfigError("key 'nonlinearity.p': power-exp needs p >= (N+2)/(N-2) = " +
                        fmt17(sobolev_exponent(N)));
    }
    if (!(number("nonlinearity.q") > 1.0)) throw ConfigError("key 'nonlinearity.q' must exceed 1");
  } else if (family == "pure-power") {
    if (!(number("nonlinearity.p") > 1.0)) throw ConfigError("key 'nonlinearity.p' must exceed 1");
  } else if (family == "cutoff-exp") {
    positive("nonlinearity.a");
  } else {
    throw ConfigError("key 'nonlinearity.family': unknown family '" + family + "'");
  }
  for (const char* k : {"solver.ode_tol", "solver.quad_tol", "solver.division_tol", "solver.ladder_tol",
                        "solver.dt_floor", "solver.u_min", "solver.T", "solver.safety",
                        "solver.mass_growth", "domain.R_outer", "domain.R_max", "domain.r_patch",
                        "experiment.sigma", "experiment.t_obs"}) {
    positive(k);
  }
  if (number("domain.R_outer") > number("domain.R_max")) {
    throw ConfigError("key 'domain.R_outer' exceeds domain.R_max");
  }
  if (integer("domain.M") < 4) throw ConfigError("key 'domain.M' must be at least 4");
  if (number("domain.r1") < 0.0 || number("domain.r1") >= number("domain.R_outer")) {
    throw ConfigError("key 'domain.r1' must lie in [0, R_outer)");
  }
  if (!(number("solver.u_max") > number("solver.u_min"))) throw ConfigError("key 'solver.u_max' must exceed u_min");
  for (const char* k : {"solver.n_samples", "solver.snapshots", "solver.slices", "solver.gl_order",
                        "solver.k_max", "solver.inner_cells", "experiment.pohozaev_stride"}) {
    if (integer(k) < 1) throw ConfigError("key '" + std::string(k) + "' must be at least 1");
  }
  for (double c : numbers("solver.caps")) {
    if (!(c > 0.0)) throw ConfigError("key 'solver.caps' must hold positive values");
  }
  numbers("experiment.factors");
  flag("solver.reaction");
  flag("solver.balanced");
  try {
    patch_method_from_string(text("solver.patch"));
  } catch (const std::exception&) {
    throw ConfigError("key 'solver.patch': unknown method '" + text("solver.patch") + "'");
  }
  const auto pert = text("experiment.perturbation");
  if (pert != "bump" && pert != "scaling" && pert != "truncation" && pert != "none") {
    throw ConfigError("key 'experiment.perturbation': unknown kind '" + pert + "'");
  }
  if (!(number("experiment.bound_t0") < number("experiment.t_obs"))) {
    throw ConfigError("key 'experiment.bound_t0' must be below experiment.t_obs");
  }
  const double delta = number("experiment.delta");
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("key 'experiment.delta' must lie in (0, 0.5)");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    j[k.substr(0, dot)][k.substr(dot + 1)] = v;
  }
  return j;
}

Nonlinearity RunConfig::nonlinearity() const {
  const auto family = text("nonlinearity.family");
  if (family == "power-exp") return Nonlinearity::power_exp(number("nonlinearity.p"), number("nonlinearity.q"));
  if (family == "pure-power") return Nonlinearity::pure_power(number("nonlinearity.p"));
  if (family == "cutoff-exp") return Nonlinearity::cutoff_exp(number("nonlinearity.a"));
  throw ConfigError("key 'nonlinearity.family': unknown family '" + family + "'");
}

RadialGrid RunConfig::grid() const {
  return RadialGrid::geometric_uniform(dim(), number("domain.R_outer"), integer("domain.M"),
                                       number("domain.r1"), number("domain.growth"));
}

AdmissibilityOptions RunConfig::admissibility_options() const {
  AdmissibilityOptions o;
  o.u_min = number("solver.u_min");
  o.u_max = number("solver.u_max");
  o.n_samples = integer("solver.n_samples");
  o.division_tol = number("solver.division_tol");
  o.barrier.tol_F = number("solver.quad_tol");
  return o;
}

SingularOptions RunConfig::singular_options() const {
  SingularOptions o;
  o.r_patch = number("domain.r_patch");
  o.R_max = number("domain.R_max");
  o.patch = patch_method_from_string(text("solver.patch"));
  o.tol.abs_tol = o.tol.rel_tol = number("solver.ode_tol");
  o.barrier.tol_F = number("solver.quad_tol");
  return o;
}

EvolutionOptions RunConfig::evolution_options() const {
  EvolutionOptions o;
  o.T = number("solver.T");
  o.safety = number("solver.safety");
  o.dt_floor = number("solver.dt_floor");
  o.sup_guard = number("solver.sup_guard");
  o.mass_growth = number("solver.mass_growth");
  o.inner_cells = integer("solver.inner_cells");
  o.transient_fraction = number("solver.transient_fraction");
  o.snapshots = integer("solver.snapshots");
  o.reaction = flag("solver.reaction");
  o.balanced = flag("solver.balanced");
  return o;
}

LadderOptions RunConfig::ladder_options() const {
  LadderOptions o;
  o.k_max = integer("solver.k_max");
  o.ladder_tol = number("solver.ladder_tol");
  o.duhamel.slices = integer("solver.slices");
  o.duhamel.gl_order = integer("solver.gl_order");
  o.stop_on_gap = false;
  return o;
}

PerturbationSpec RunConfig::perturbation(double ustar_rc) const {
  const auto kind = text("experiment.perturbation");
  if (kind == "bump") {
    return PerturbationSpec::bump(number("experiment.r_c"), number("experiment.sigma"),
                                  number("experiment.amplitude") * ustar_rc);
  }
  if (kind == "scaling") return PerturbationSpec::scaling(number("experiment.theta"));
  if (kind == "truncation") return PerturbationSpec::truncation(number("experiment.level"));
  return PerturbationSpec::scaling(1.0);
}

ArtifactSet::ArtifactSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ArtifactSet::path(const std::string& name) {
  names_.push_back(name);
  return (dir_ / (name + ".partial")).string();
}

void ArtifactSet::write_json(const std::string& name, const nlohmann::json& j) {
  std::ofstream os(path(name));
  if (!os) throw std::runtime_error("cannot write " + name);
  os << j.dump(2) << '\n';
}

void ArtifactSet::commit() {
  for (const auto& n : names_) fs::rename(dir_ / (n + ".partial"), dir_ / n);
  names_.clear();
}

fs::path make_run_dir(const RunOptions& opts, const std::string& command) {
  if (!opts.timestamped) return opts.out_dir;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  fs::path dir = opts.out_dir / (command + "-" + stamp);
  for (int k = 1; fs::exists(dir); ++k) dir = opts.out_dir / (command + "-" + stamp + "-" + std::to_string(k));
  return dir;
}

namespace {

struct Context {
  const RunConfig& cfg;
  ArtifactSet& art;
  std::ostream& err;
  bool verbose;

  void log(const std::string& msg) const {
    if (verbose) err << "[stlab] " << msg << '\n';
  }
  nlohmann::json wrap(nlohmann::json result) const {
    return {{"config", cfg.to_json()}, {"result", std::move(result)}};
  }
};

SingularSolutionTable table_for(const Context& c, const Nonlinearity& spec) {
  c.log("building u* for " + spec.descriptor() + " in N=" + std::to_string(c.cfg.dim()));
  return build_singular(spec, c.cfg.dim(), c.cfg.singular_options());
}

int cmd_check(const Context& c, const RunOptions& opts) {
  const auto spec = c.cfg.nonlinearity();
  const auto rep = check_admissibility(spec, c.cfg.dim(), c.cfg.admissibility_options());
  const auto j = c.wrap(rep.to_json());
  c.art.write_json("admissibility.json", j);
  if (!opts.report_path.empty()) {
    std::ofstream os(opts.report_path);
    if (!os) throw std::runtime_error("cannot write " + opts.report_path.string());
    os << j.dump(2) << '\n';
  }
  for (const auto& cond : rep.conditions) {
    c.err << cond.condition << ' ' << (cond.verdict == Verdict::Pass ? "PASS" : "FAIL") << '\n';
  }
  return rep.all_pass() ? 0 : 1;
}

int cmd_singular(const Context& c) {
  const auto spec = c.cfg.nonlinearity();
  const auto adm = check_admissibility(spec, c.cfg.dim(), c.cfg.admissibility_options());
  c.art.write_json("admissibility.json", c.wrap(adm.to_json()));
  if (!adm.all_pass()) {
    c.err << "warning: " << spec.descriptor() << " is not admissible on the samples; building u* anyway\n";
  }
  const auto table = table_for(c, spec);
  table.write_csv(c.art.path("singular_table.csv"));
  auto sidecar = table.sidecar();
  sidecar["config"] = c.cfg.to_json();
  c.art.write_json("singular_table.json", sidecar);

  c.log("flux identity and Pohozaev trace");
  const auto flux = verify_flux_identity(table);
  const auto poh = trace_pohozaev(table, c.cfg.integer("experiment.pohozaev_stride"));
  {
    std::ofstream os(c.art.path("pohozaev.csv"));
    os << "r,P\n";
    for (std::size_t i = 0; i < poh.r.size(); ++i) os << fmt17(poh.r[i]) << ',' << fmt17(poh.P[i]) << '\n';
  }
  const double r0 = table.r.front();
  const auto ratio = asymptotic_ratio(table, r0, std::min(table.r_end(), 1.0));
  double lo = INFINITY, hi = -INFINITY;
  {
    std::ofstream os(c.art.path("asymptotic_ratio.csv"));
    os << "r,ratio\n";
    for (const auto& [r, v] : ratio) {
      os << fmt17(r) << ',' << fmt17(v) << '\n';
      if (r <= 10.0 * r0) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  nlohmann::json v;
  v["flux"] = {{"max_residual", flux.max_residual},
               {"residual_at_patch", flux.residual_at_patch},
               {"worst_r", flux.worst_r}};
  v["pohozaev"] = {{"max_slope", poh.max_slope},
                   {"max_relative_slope", poh.max_relative_slope},
                   {"relative_variation", poh.relative_variation},
                   {"P_at_patch", poh.P_at_patch}};
  v["asymptotic_ratio_smallest_decade"] = {{"min", lo}, {"max", hi}};
  v["error_estimate"] = table.error_estimate;
  v["patch_mismatch"] = table.patch_mismatch ? nlohmann::json(*table.patch_mismatch) : nlohmann::json();
  v["reached_R_max"] = table.reached_R_max;
  v["u_star_at_R_max"] = table.u.back();
  try {
    v["growth_bounds"] = verify_growth_bounds(table, c.cfg.number("experiment.delta")).to_json();
  } catch (const std::exception& e) {
    v["growth_bounds"] = {{"error", e.what()}};
  }
  c.art.write_json("verification.json", c.wrap(v));
  c.err << "u*(" << table.r_end() << ") = " << table.u.back() << ", flux residual " << flux.max_residual
        << '\n';
  return 0;
}

int cmd_evolve(const Context& c) {
  const auto spec = c.cfg.nonlinearity();
  const auto table = table_for(c, spec);
  const auto grid = c.cfg.grid();
  const auto pert = c.cfg.perturbation(table.value(c.cfg.number("experiment.r_c")));
  const auto caps = c.cfg.numbers("solver.caps");
  c.log("evolving " + pert.describe() + " over " + std::to_string(caps.size()) + " caps");
  const auto rep = run_case(spec, table, grid, pert, caps, c.cfg.evolution_options());
  auto j = rep.to_json();
  const auto ustar_raw = sample_singular(table, grid, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < rep.per_cap.size(); ++k) {
    const auto& o = rep.per_cap[k];
    const std::string tag = "cap" + std::to_string(k);
    o.write_norms_csv(c.art.path("norms_" + tag + ".csv"));
    write_snapshots_csv(c.art.path("snapshots_" + tag + ".csv"), o.snapshot_times, o.snapshots);
    auto probe = nlohmann::json::array();
    for (const auto& s : amplification_probe(o, ustar_raw)) probe.push_back({{"t", s.t}, {"alpha", s.alpha}});
    j["amplification"][tag] = {{"cap", o.cap}, {"samples", probe}};
  }
  c.art.write_json("evolve.json", c.wrap(j));
  c.err << "classification " << to_string(rep.classification) << (rep.cap_stable ? "" : " (caps disagree)")
        << '\n';
  return 0;
}

int cmd_iterate(const Context& c) {
  const auto spec = c.cfg.nonlinearity();
  const auto table = table_for(c, spec);
  const auto grid = c.cfg.grid();
  const double cap = c.cfg.numbers("solver.caps").front();
  const auto upper = sample_singular(table, grid, cap);
  auto u0 = upper;
  const double theta = c.cfg.number("experiment.theta");
  if (theta > 1.0) throw ConfigError("key 'experiment.theta' must not exceed 1 for the ladder");
  for (double& v : u0.values) v *= theta;
  u0.grid.outer_value *= theta;
  const double t_obs = c.cfg.number("experiment.t_obs");
  const auto lo = c.cfg.ladder_options();
  DuhamelMap map(grid, spec, t_obs, lo.duhamel);
  c.log("ladder from below");
  const auto below = run_ladder(LadderSeed::FromBelow, u0, upper, map, lo);
  c.log("ladder from above");
  const auto above = run_ladder(LadderSeed::FromAbove, u0, upper, map, lo);
  const double sandwich = sandwich_violation(below, above);

  nlohmann::json j;
  j["below"] = below.to_json();
  j["above"] = above.to_json();
  j["sandwich_violation"] = sandwich;
  j["cap"] = cap;
  j["theta"] = theta;
  j["lag_count"] = map.lag_count();
  for (const auto* L : {&below, &above}) {
    const auto est = limit_estimate(*L);
    j[L == &below ? "minimal_estimate" : "maximal_estimate"] = {
        {"iterations", est.iterations}, {"cauchy_gap", est.cauchy_gap}, {"gaps_decreasing", est.gaps_decreasing}};
  }
  if (above.iterates.size() >= 5) {
    j["immediate_boundedness"] =
        check_immediate_boundedness(above, spec, c.cfg.number("experiment.bound_t0"), t_obs).to_json();
  }
  c.art.write_json("ladder.json", c.wrap(j));
  {
    std::ofstream os(c.art.path("iterates.csv"));
    os << "k,r,v_k,w_k\n";
    for (std::size_t k = 0; k < below.iterates.size(); ++k) {
      const auto v = below.at_obs(k);
      const auto w = above.at_obs(k);
      for (std::size_t i = 0; i < grid.r.size(); ++i) {
        os << k << ',' << fmt17(grid.r[i]) << ',' << fmt17(v.values[i]) << ',' << fmt17(w.values[i]) << '\n';
      }
    }
  }
  c.err << "sandwich violation " << sandwich << ", final gaps " << below.cauchy_gaps.back() << " / "
        << above.cauchy_gaps.back() << '\n';
  return sandwich <= lo.ladder_tol ? 0 : 1;
}

int cmd_scan(const Context& c) {
  const auto spec = c.cfg.nonlinearity();
  const auto table = table_for(c, spec);
  const auto grid = c.cfg.grid();
  c.log("scanning bump amplitudes");
  const auto rep = threshold_scan(spec, table, grid, c.cfg.number("experiment.r_c"),
                                  c.cfg.number("experiment.sigma"), c.cfg.numbers("experiment.factors"),
                                  c.cfg.numbers("solver.caps"), c.cfg.evolution_options());
  rep.write_csv(c.art.path("scan.csv"));
  c.art.write_json("scan.json", c.wrap(rep.to_json()));
  for (const auto& row : rep.rows) {
    c.err << "A=" << row.amplitude << ' ' << to_string(row.report.classification) << '\n';
  }
  return 0;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& config, const RunOptions& opts,
                std::ostream& out, std::ostream& err) {
  static const std::vector<std::string> known{"check", "singular", "evolve", "iterate", "scan"};
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    err << "unknown command '" << command << "'\n";
    return 2;
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  }
  std::unique_ptr<ArtifactSet> art;
  try {
    art = std::make_unique<ArtifactSet>(make_run_dir(opts, command));
    out << art->dir().string() << '\n';
    const Context c{config, *art, err, opts.verbose};
    int code = 0;
    if (command == "check") code = cmd_check(c, opts);
    if (command == "singular") code = cmd_singular(c);
    if (command == "evolve") code = cmd_evolve(c);
    if (command == "iterate") code = cmd_iterate(c);
    if (command == "scan") code = cmd_scan(c);
    art->commit();
    return code;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace stlab
