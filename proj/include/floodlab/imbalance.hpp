#pragma once

#include <cstddef>
#include <vector>

namespace floodlab {

using ClassCounts = std::vector<std::size_t>;

/// Exponentially decaying class profile: K classes, the first holding
/// n_max samples and the last n_max / rho.
struct LongTailSpec {
  std::size_t num_classes = 10;
  std::size_t n_max = 5000;
  double rho = 1.0;
};

/// Per-class flooding levels b_k = b_base * N_k / N.
struct FloodingSchedule {
  double b_base = 0.0;
  std::vector<double> levels;

  std::size_t num_classes() const { return levels.size(); }
  double min_level() const;
};

/// N_k = round_half_up(n_max / rho^(k/(K-1))), clamped to at least 1.
ClassCounts longtail_counts(const LongTailSpec& spec);

FloodingSchedule flooding_schedule(double b_base, const ClassCounts& counts);

/// Inverse-frequency weights w_k = N / (K * N_k).
std::vector<double> class_weights(const ClassCounts& counts);

std::size_t total_count(const ClassCounts& counts);

/// floor(x + 0.5) for non-negative x.
std::size_t round_half_up(double x);

}  // namespace floodlab
