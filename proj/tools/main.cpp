#include <CLI11.hpp>
#include <iostream>
#include <thread>

#include "atomguide/cli.hpp"
#include "atomguide/errors.hpp"

namespace cli = atomguide::cli;

int main(int argc, char** argv) {
  CLI::App app{"Atom-optics beam splitter and deflector simulations"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool noCache = false;
  for (auto kind : {cli::ScenarioKind::Eigen, cli::ScenarioKind::SplitRun, cli::ScenarioKind::SplitSweep,
                    cli::ScenarioKind::DeflectSweep, cli::ScenarioKind::GpeMuCurve, cli::ScenarioKind::GpeFall}) {
    auto* sub = app.add_subcommand(cli::scenario_name(kind));
    sub->add_option("--config", config, "Config file (TOML-style key = value)")->required();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-cache", noCache, "Recompute instead of reading cached ensemble runs");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    cli::RunConfig cfg = cli::parse_config_file(config);
    if (cli::scenario_name(cfg.scenario) != name) {
      throw atomguide::ConfigError("scenario", "config declares '" + cli::scenario_name(cfg.scenario) +
                                                   "' but the subcommand is '" + name + "'");
    }
    cli::run(cfg, {out, jobs, !noCache}, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << cli::error_json(e) << '\n';
    return cli::exit_code(e);
  }
  return 0;
}
