// schauder_lab: runs one experiment from a key-value config.
//
//   schauder_lab --config norms.cfg --out results/ [--seed N] [--fixed-clock]
//   schauder_lab --list-experiments
//
// Exit status: 0 all invariants hold, 1 an invariant failed, 2 bad config.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "schauder/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on Schauder estimates, potentials and boundary blow-up"};
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool fixed_clock = false;
  bool list = false;
  app.add_option("--config", config_path, "experiment config (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "directory for report.json and sweep.csv")->capture_default_str();
  app.add_option("--seed", seed, "random seed, overrides the config's seed field");
  app.add_flag("--fixed-clock", fixed_clock, "omit wall-clock fields so reruns are byte-identical");
  app.add_flag("--list-experiments", list, "print the experiment kinds and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (list) {
    for (const auto& k : schauder::experiment_kinds()) std::cout << k.name << "\t" << k.summary << "\n";
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "schauder_lab: --config is required (or --list-experiments)\n";
    return 2;
  }

  schauder::ExperimentOutcome outcome;
  try {
    auto cfg = schauder::KeyValueConfig::load(config_path);
    outcome = schauder::run_experiment(cfg, {fixed_clock, seed});
  } catch (const schauder::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return 2;
  }
  if (outcome.status == 2) {
    std::cerr << config_path << ": " << outcome.message << "\n";
    return 2;
  }

  try {
    schauder::write_outputs(outcome, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "schauder_lab: " << e.what() << "\n";
    return 2;
  }
  const auto& inv = outcome.report["invariants"];
  std::cout << outcome.report["experiment"].get<std::string>() << ": " << inv.size() - outcome.failed.size() << "/"
            << inv.size() << " invariants hold; report " << (std::filesystem::path(out_dir) / outcome.report_name).string()
            << "\n";
  for (const auto& name : outcome.failed) std::cerr << "invariant failed: " << name << "\n";
  return outcome.status;
}
