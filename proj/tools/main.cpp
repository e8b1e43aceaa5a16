#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "asmopt/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"asmopt: overlapping Schwarz solvers for convex optimization "
               "with a finite-element experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  asmopt::RunOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  int budget = 0;

  auto add_common = [&](CLI::App* cmd, bool with_budget) {
    cmd->add_option("config", config_path, "configuration file (json)")
        ->required();
    cmd->add_option("--out", out_dir,
                    "output directory (default: config value, then "
                    "$ASMOPT_OUT)");
    cmd->add_option("--seed", seed, "override the experiment seed");
    if (with_budget)
      cmd->add_option("--budget", budget, "override the iteration budget");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);
  run->add_flag("--override-tau", opts.override_tau,
                "allow tau beyond the step bound (unsafe: convergence is "
                "not guaranteed)");

  CLI::App* suite = app.add_subcommand("suite", "run a suite of experiments");
  add_common(suite, false);

  CLI::App* validate =
      app.add_subcommand("validate", "validate a configuration file");
  validate->add_option("config", config_path, "configuration file (json)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (run->count("--seed") || suite->count("--seed")) opts.seed = seed;
  if (run->count("--budget")) opts.budget = budget;

  if (run->parsed()) return asmopt::run_experiment_file(config_path, opts, std::cout);
  if (suite->parsed()) return asmopt::run_suite_file(config_path, opts, std::cout);
  return asmopt::validate_config_file(config_path, std::cout);
}
