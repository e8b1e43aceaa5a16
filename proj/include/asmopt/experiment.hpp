#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asmopt/analysis.hpp"
#include "asmopt/objectives.hpp"
#include "asmopt/solvers.hpp"

namespace asmopt {

using Json = nlohmann::ordered_json;

/// Invalid configuration (maps to exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshConfig {
  int d = 1;
  int m = 8;
  int r = 4;
};

struct DecompositionConfig {
  std::vector<int> layout; // one entry per axis; defaults per dimension
  int overlap_layers = 1;
  bool two_level = false;
};

struct SolverConfig {
  std::string kind = "asm-exact"; // asm-exact | constraint-decomposition |
                                  // bcd | asm-bcd | forward-backward
  std::optional<double> tau;      // empty = tau0 of the splitting
  std::optional<double> omega;    // empty = omega0 of the local solver
  int budget = 100;
  double eps_local = 1e-10;
  int local_cap = 2000;
};

struct ReferenceConfig {
  int budget_factor = 10;
  double eps_local = 1e-12;
  double certify_tol = 1e-7;
};

struct ExperimentConfig {
  std::string problem; // linear | slap | l1obstacle | obstacle | bcd
  double s = 4.0;
  double lambda = 1.0;
  double load = 1.0;              // f == load (constant)
  std::string obstacle = "bump";  // bump | hat
  std::vector<int> bcd_sizes{4, 4, 4, 4};
  double bcd_l1 = 0.3;
  MeshConfig mesh;
  DecompositionConfig decomposition;
  SolverConfig solver;
  ReferenceConfig reference;
  std::string fit = "auto"; // auto | linear | sublinear
  std::uint64_t seed = 0;
  std::string output_dir;
  bool override_tau = false; // allow tau beyond the coloring bound
};

ExperimentConfig parse_experiment_config(const Json& j);

/// Lossless echo: parsing the result reproduces the configuration.
Json config_to_json(const ExperimentConfig& cfg);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  bool override_tau = false;
};

/// Exit codes: 0 success, 2 configuration error, 3 solver failure,
/// 4 reference-solve failure.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);
int run_experiment_file(const std::string& path, const RunOptions& opts,
                        std::ostream& log);
int run_suite_file(const std::string& path, const RunOptions& opts,
                   std::ostream& log);
int validate_config_file(const std::string& path, std::ostream& log);

/// Output root when neither --out nor the config names one:
/// $ASMOPT_OUT or ./asmopt_out.
std::string default_output_root();

} // namespace asmopt
