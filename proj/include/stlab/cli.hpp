#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlab/admissibility.hpp"
#include "stlab/monotone_iteration.hpp"
#include "stlab/singular_ode.hpp"
#include "stlab/threshold_lab.hpp"

namespace stlab {

/// Flat sectioned key=value configuration. Every key has a default; setting
/// an unknown key or a malformed value throws ConfigError naming the key.
///
///   [nonlinearity]
///   family = power-exp
///   p = 5
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  /// `section.key`.
  void set(const std::string& dotted, const std::string& value);
  bool has(const std::string& dotted) const;

  std::string text(const std::string& dotted) const;
  double number(const std::string& dotted) const;
  int integer(const std::string& dotted) const;
  bool flag(const std::string& dotted) const;
  std::vector<double> numbers(const std::string& dotted) const;

  /// Range checks across keys; throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;

  Nonlinearity nonlinearity() const;
  int dim() const { return integer("domain.dim"); }
  RadialGrid grid() const;
  AdmissibilityOptions admissibility_options() const;
  SingularOptions singular_options() const;
  EvolutionOptions evolution_options() const;
  LadderOptions ladder_options() const;
  PerturbationSpec perturbation(double ustar_rc) const;

  /// The known keys with their defaults, `section.key` -> value.
  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

struct RunOptions {
  std::filesystem::path out_dir = "stlab-runs";
  /// Put artifacts in out_dir/<command>-<UTC timestamp>; otherwise directly in out_dir.
  bool timestamped = true;
  /// Extra copy of the check report.
  std::filesystem::path report_path;
  bool verbose = false;
};

/// Files written as <name>.partial and renamed once the command finishes, so
/// an interrupted or failed run leaves only .partial files behind.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::filesystem::path dir);
  const std::filesystem::path& dir() const { return dir_; }
  /// Path to write to (with the .partial suffix).
  std::string path(const std::string& name);
  void write_json(const std::string& name, const nlohmann::json& j);
  void commit();
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

/// Exit codes: 0 success, 1 scientific failure or module error, 2 usage or
/// configuration error. Diagnostics go to `err`, the run directory to `out`.
int run_command(const std::string& command, const RunConfig& config, const RunOptions& opts,
                std::ostream& out, std::ostream& err);

std::filesystem::path make_run_dir(const RunOptions& opts, const std::string& command);

}  // namespace stlab
