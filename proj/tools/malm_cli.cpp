// malm: solve, compare and sweep driver for the augmented Lagrangian solvers.
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "malm/cli.hpp"
#include "malm/config.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> settings;
};

// Registers a string flag that maps to a config key; only flags present on
// the command line are forwarded, so they override the config file.
void add_setting(CLI::App& app, std::vector<std::pair<CLI::Option*, std::string>>& opts,
                 std::map<std::string, std::string>& storage, const std::string& flag,
                 const std::string& key, const std::string& help) {
  auto* opt = app.add_option(flag, storage[key], help);
  opts.emplace_back(opt, key);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmented Lagrangian / modified augmented Lagrangian solvers"};
  app.require_subcommand(1);

  Flags flags;
  std::map<std::string, std::string> storage;
  std::vector<std::pair<CLI::Option*, std::string>> opts;

  auto* solve = app.add_subcommand("solve", "run one method and write its CSV trace");
  auto* compare = app.add_subcommand("compare", "compare methods on one problem and omega_e");
  auto* sweep = app.add_subcommand("sweep", "MALM solves along a decreasing omega_e schedule");

  for (auto* sub : {solve, compare, sweep}) {
    sub->add_option("--config", flags.config_path, "key = value config file");
    add_setting(*sub, opts, storage, "--problem", "problem", "catalog name or QP data file");
    add_setting(*sub, opts, storage, "--omega", "omega", "inner penalty divisor omega > 0");
    add_setting(*sub, opts, storage, "--omega-e", "omega_e", "target penalty omega_e >= 0");
    add_setting(*sub, opts, storage, "--outer-tol", "outer_tol", "outer stopping tolerance");
    add_setting(*sub, opts, storage, "--max-outer", "max_outer", "outer iteration limit");
    add_setting(*sub, opts, storage, "--out", "out", "output CSV path");
    add_setting(*sub, opts, storage, "--x0", "x0", "initial primal point (comma separated)");
    add_setting(*sub, opts, storage, "--lambda0", "lambda0", "initial multipliers (comma separated)");
    add_setting(*sub, opts, storage, "--inner-tol", "inner_grad_tol", "inner gradient tolerance");
    add_setting(*sub, opts, storage, "--inner-max-iters", "inner_max_iters", "inner iteration limit");
  }
  add_setting(*solve, opts, storage, "--method", "method", "alm | malm | malm-root | penalty");
  add_setting(*compare, opts, storage, "--methods", "methods", "comma separated method list");
  add_setting(*sweep, opts, storage, "--schedule", "schedule", "decreasing omega_e values, last may be 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : malm::cli::kExitConfigError;
  }

  malm::config::RunConfig rc;
  try {
    std::map<std::string, std::string> file_settings;
    if (!flags.config_path.empty()) file_settings = malm::config::read_key_value_file(flags.config_path);
    for (const auto& [opt, key] : opts) {
      if (opt->count() > 0) flags.settings.emplace_back(key, storage[key]);
    }
    rc = malm::config::build_run_config(file_settings, flags.settings);
  } catch (const malm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return malm::cli::kExitConfigError;
  }

  if (solve->parsed()) return malm::cli::cmd_solve(rc, std::cout, std::cerr);
  if (compare->parsed()) return malm::cli::cmd_compare(rc, std::cout, std::cerr);
  return malm::cli::cmd_sweep(rc, std::cout, std::cerr);
}
