#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floodlab/losses.hpp"
#include "floodlab/metrics.hpp"
#include "floodlab/model.hpp"
#include "floodlab/trainer.hpp"

namespace floodlab {

struct DatasetConfig {
  std::string kind = "blobs";  // "blobs" or "cifar10"
  std::size_t classes = 5;
  std::size_t dim = 2;
  std::size_t n_max = 400;
  double spread = 0.5;
  std::size_t test_per_class = 200;
  std::uint64_t seed = 0;
  std::string path;  // cifar10 only
};

/// One loss kind of the grid. Flooding kinds expand into one cell per level;
/// focal uses gamma; ce and weighted_ce take no parameter.
struct LossGridEntry {
  LossKind kind = LossKind::kCe;
  std::vector<double> levels;
  double gamma = 2.0;
};

inline const std::vector<double> kDefaultLevels = {0.01, 0.05, 0.1};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<double> rho;
  std::vector<LossGridEntry> losses;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t eval_every = 1;
  double val_frac = 0.1;
  std::string output_dir;
  std::size_t workers = 1;
};

/// Parses and validates a JSON config (or a manifest.json carrying one under
/// "config"). Throws ValidationError with the offending key.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Normalized JSON echo with every default filled in.
std::string config_to_json(const ExperimentConfig& config);

/// Checks ranges and dataset availability; throws ValidationError.
void validate(const ExperimentConfig& config);

struct CellSpec {
  std::size_t cell_id = 0;
  double rho = 1.0;
  LossKind kind = LossKind::kCe;
  double level_param = 0.0;
};

/// Cells in grid order: rho, then loss entry, then level.
std::vector<CellSpec> expand_cells(const ExperimentConfig& config);

struct RunResult {
  std::size_t run_id = 0;
  std::size_t cell_id = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t best_epoch = 0;
  Evaluation test;
  std::vector<TrainRecord> records;
  MlpParams best_params;
  std::vector<std::string> warnings;
};

struct GridResult {
  std::vector<CellSpec> cells;
  std::vector<RunResult> runs;  // ordered by run_id
  std::vector<std::optional<CellSummary>> summaries;  // per cell; empty if every run failed
};

/// Runs every (cell, seed) pair on up to `workers` threads. Each run owns its
/// generators, so results do not depend on scheduling.
GridResult run_grid(const ExperimentConfig& config, std::size_t workers);

/// Training spec for a cell once the training-split class counts are known.
LossSpec resolve_loss(const CellSpec& cell, const LossGridEntry& entry,
                      const ClassCounts& train_counts);

void write_curves_csv(std::ostream& out, const GridResult& grid);
void write_summary_csv(std::ostream& out, const GridResult& grid);

/// Writes curves.csv, summary.csv, manifest.json and checkpoints/ to out_dir.
void write_outputs(const ExperimentConfig& config, const GridResult& grid,
                   const std::filesystem::path& out_dir);

/// Table of class-wise flooding levels for every (rho, b_base) pair, computed
/// from training-split counts after the validation share is removed.
std::string export_levels(const ExperimentConfig& config);

/// The `run` subcommand. Returns 0 on success, 1 on invalid config, 3 when one
/// or more runs failed (partial outputs are still written).
int run_command(const std::filesystem::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::size_t>& workers_override, std::ostream& log);

}  // namespace floodlab
