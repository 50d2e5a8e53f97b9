#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace floodlab {

/// Test accuracies of one seed of one experiment cell.
struct RunAccuracies {
  std::uint64_t seed = 0;
  std::vector<double> class_accuracy;
};

/// Mean and sample standard deviation (n - 1) over seeds. The overall mean
/// is the unweighted mean of the per-class means; the overall std is taken
/// over each seed's class-averaged accuracy. Stds are 0 for a single seed.
struct CellSummary {
  std::string dataset;
  double rho = 1.0;
  std::string loss_kind;
  double level_param = 0.0;
  std::vector<double> class_mean;
  std::vector<double> class_std;
  double overall_mean = 0.0;
  double overall_std = 0.0;
  std::size_t seed_count = 0;
};

struct CellDelta {
  std::vector<double> class_delta;
  double overall_delta = 0.0;
};

double sample_mean(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

/// Aggregates runs; the result does not depend on the order of `runs`.
/// Throws AggregationError if runs is empty or the class counts differ.
CellSummary summarize(std::vector<RunAccuracies> runs);

/// a - b, per class and overall. Throws AggregationError on mismatched shapes
/// or dataset tags.
CellDelta compare(const CellSummary& a, const CellSummary& b);

}  // namespace floodlab
