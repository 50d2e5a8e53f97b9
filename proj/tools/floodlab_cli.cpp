#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "floodlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"floodlab: flooding-family losses for imbalanced classification"};
  app.set_version_flag("--version", std::string("floodlab ") + FLOODLAB_VERSION);
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  auto* run = app.add_subcommand("run", "Train every (rho, loss, level, seed) cell of a config");
  run->add_option("config", run_config, "Experiment config (JSON) or a previous manifest.json")
      ->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

  std::string levels_config;
  auto* levels = app.add_subcommand("export-levels", "Print class-wise flooding levels");
  levels->add_option("config", levels_config, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return floodlab::run_command(run_config, out_dir, workers, std::cerr);
    if (*levels) {
      std::cout << floodlab::export_levels(floodlab::load_config(levels_config));
      return 0;
    }
  } catch (const floodlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
