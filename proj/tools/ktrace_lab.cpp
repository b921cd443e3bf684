// ktrace_lab: run checks on the counterexample and circle models.
//
//   ktrace_lab run --config cfg.json [--check NAME]... [--out DIR] [--seed S] [--expect-fail]
//   ktrace_lab convergence --config cfg.json --quantity NAME [--out FILE]
//
// Exit status: 0 all checks pass, 1 a check failed (reports are still
// written), 2 configuration error. --expect-fail inverts the first two.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ktrace/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::vector<std::string>& checks,
                const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed, bool expect_fail) {
  ktrace::ExperimentConfig cfg;
  try {
    cfg = ktrace::ExperimentConfig::load(config_path);
    if (!checks.empty()) cfg.checks = checks;
    if (out) cfg.output = *out;
    if (seed) cfg.seed = *seed;
    cfg.validate();
  } catch (const ktrace::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return ktrace::run_experiment(cfg, expect_fail, std::cout);
}

int convergence_command(const std::string& config_path, const std::string& quantity,
                        const std::optional<std::string>& out) {
  try {
    const ktrace::Experiment ex(ktrace::ExperimentConfig::load(config_path));
    const auto& names = ktrace::Experiment::quantities();
    if (std::find(names.begin(), names.end(), quantity) == names.end())
      throw ktrace::ConfigError("unknown quantity '" + quantity + "'");
    const std::string csv = ktrace::ConvergenceTable::from_estimate(quantity, ex.quantity(quantity)).csv();
    if (out)
      std::ofstream(*out) << csv;
    else
      std::cout << csv;
    return 0;
  } catch (const ktrace::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dixmier-trace experiments on finite K-cycle truncations"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> checks;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool expect_fail = false;
  auto* run = app.add_subcommand("run", "run checks and write JSON/CSV reports");
  run->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--check", checks, "check to run (repeatable; overrides the config list)");
  run->add_option("--out", out, "report directory");
  run->add_option("--seed", seed, "seed for randomized inputs");
  run->add_flag("--expect-fail", expect_fail, "succeed only if every check fails");

  std::string quantity;
  std::optional<std::string> csv_out;
  auto* conv = app.add_subcommand("convergence", "print the N,ratio,increment table of a named estimate");
  conv->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  conv->add_option("--quantity", quantity, "tau_b_minus_d, abs_dirac_minus_d, zero, phi_identity, phi_generator, "
                                           "form_defect or commutator_vanishing")
      ->required();
  conv->add_option("--out", csv_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*run) return run_command(config_path, checks, out, seed, expect_fail);
  return convergence_command(config_path, quantity, csv_out);
}
