#include "floodlab/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "floodlab/errors.hpp"

namespace floodlab {

namespace {

void require_positive_counts(const ClassCounts& counts, const char* what) {
  if (counts.empty()) throw ParameterError(std::string(what) + ": empty count vector");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      throw ParameterError(std::string(what) + ": class " + std::to_string(k) +
                           " has zero samples");
    }
  }
}

}  // namespace

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::size_t total_count(const ClassCounts& counts) {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double FloodingSchedule::min_level() const {
  if (levels.empty()) return 0.0;
  return *std::min_element(levels.begin(), levels.end());
}

ClassCounts longtail_counts(const LongTailSpec& spec) {
  if (spec.num_classes < 2) {
    throw ParameterError("longtail_counts: need at least 2 classes, got " +
                         std::to_string(spec.num_classes));
  }
  if (spec.n_max < 1) throw ParameterError("longtail_counts: n_max must be >= 1");
  if (!(spec.rho >= 1.0) || !std::isfinite(spec.rho)) {
    throw ParameterError("longtail_counts: rho must be finite and >= 1, got " +
                         std::to_string(spec.rho));
  }
  const double last = static_cast<double>(spec.num_classes - 1);
  ClassCounts counts(spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    const double exponent = static_cast<double>(k) / last;
    const double n = static_cast<double>(spec.n_max) / std::pow(spec.rho, exponent);
    counts[k] = std::max<std::size_t>(1, round_half_up(n));
  }
  return counts;
}

FloodingSchedule flooding_schedule(double b_base, const ClassCounts& counts) {
  if (!(b_base >= 0.0) || !std::isfinite(b_base)) {
    throw ParameterError("flooding_schedule: b_base must be finite and >= 0");
  }
  require_positive_counts(counts, "flooding_schedule");
  const auto total = static_cast<double>(total_count(counts));
  FloodingSchedule schedule;
  schedule.b_base = b_base;
  schedule.levels.reserve(counts.size());
  for (std::size_t n : counts) {
    schedule.levels.push_back(b_base * (static_cast<double>(n) / total));
  }
  return schedule;
}

std::vector<double> class_weights(const ClassCounts& counts) {
  require_positive_counts(counts, "class_weights");
  const auto total = static_cast<double>(total_count(counts));
  const auto k = static_cast<double>(counts.size());
  std::vector<double> weights;
  weights.reserve(counts.size());
  for (std::size_t n : counts) weights.push_back(total / (k * static_cast<double>(n)));
  return weights;
}

}  // namespace floodlab
