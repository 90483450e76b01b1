#include <stocon/cli/config.hpp>
#include <stocon/cli/report.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace stocon::cli;

int main(int argc, char** argv) {
  CLI::App app{"Seeded Monte Carlo experiments for stochastic contraction processes"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::size_t seeds = 0, horizon = 0;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seeds", seeds, "Override ensemble.seeds")->check(CLI::PositiveNumber);
  run->add_option("--horizon", horizon, "Override ensemble.horizon")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Override output.dir");
  run->add_flag("--traces", overrides.traces, "Write per-step traces.csv");

  auto* check = app.add_subcommand("check", "Validate a config without running it");
  check->add_option("config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitEnvironment;
  }

  ExperimentConfig config;
  try {
    config = load_config(config_path);
    if (run->parsed()) {
      if (run->count("--seeds")) overrides.seeds = seeds;
      if (run->count("--horizon")) overrides.horizon = horizon;
      if (run->count("--out")) overrides.out = out_dir;
      apply_overrides(config, overrides);
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitEnvironment;
  }

  if (check->parsed()) {
    std::cout << "config ok: " << to_string(config.kind) << ", " << config.ensemble.seeds
              << " seeds, horizon " << config.ensemble.horizon << "\n";
    return kExitPass;
  }
  return execute(config, std::cout, std::cerr);
}
