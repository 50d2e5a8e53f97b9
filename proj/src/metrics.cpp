#include "floodlab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "floodlab/errors.hpp"

namespace floodlab {

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

CellSummary summarize(std::vector<RunAccuracies> runs) {
  if (runs.empty()) throw AggregationError("summarize: no runs");
  const std::size_t classes = runs.front().class_accuracy.size();
  for (const auto& run : runs) {
    if (run.class_accuracy.size() != classes) {
      throw AggregationError("summarize: run for seed " + std::to_string(run.seed) + " has " +
                             std::to_string(run.class_accuracy.size()) + " classes, expected " +
                             std::to_string(classes));
    }
  }
  // A canonical order makes the floating-point sums independent of input order.
  std::sort(runs.begin(), runs.end(), [](const RunAccuracies& a, const RunAccuracies& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.class_accuracy < b.class_accuracy;
  });

  CellSummary summary;
  summary.seed_count = runs.size();
  std::vector<double> column(runs.size());
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].class_accuracy[k];
    summary.class_mean.push_back(sample_mean(column));
    summary.class_std.push_back(sample_std(column));
  }
  std::vector<double> run_means(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) run_means[r] = sample_mean(runs[r].class_accuracy);
  summary.overall_mean = sample_mean(summary.class_mean);
  summary.overall_std = sample_std(run_means);
  return summary;
}

CellDelta compare(const CellSummary& a, const CellSummary& b) {
  if (a.dataset != b.dataset) {
    throw AggregationError("compare: dataset '" + a.dataset + "' vs '" + b.dataset + "'");
  }
  if (a.class_mean.size() != b.class_mean.size()) {
    throw AggregationError("compare: " + std::to_string(a.class_mean.size()) + " vs " +
                           std::to_string(b.class_mean.size()) + " classes");
  }
  CellDelta delta;
  for (std::size_t k = 0; k < a.class_mean.size(); ++k) {
    delta.class_delta.push_back(a.class_mean[k] - b.class_mean[k]);
  }
  delta.overall_delta = a.overall_mean - b.overall_mean;
  return delta;
}

}  // namespace floodlab
