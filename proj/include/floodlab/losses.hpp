#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "floodlab/imbalance.hpp"
#include "floodlab/numkit.hpp"

namespace floodlab {

using Label = std::int32_t;

enum class LossKind { kCe, kWeightedCe, kFocal, kFlood, kIFlood, kCwFlood };

// One struct per loss variant, each carrying exactly the parameters it needs.
struct CrossEntropy {};
struct WeightedCrossEntropy {
  std::vector<double> class_weights;
};
struct FocalLoss {
  double gamma = 2.0;
};
struct Flooding {
  double b = 0.0;
};
struct IFlooding {
  double b = 0.0;
};
struct ClassWiseFlooding {
  FloodingSchedule schedule;
};

using LossSpec = std::variant<CrossEntropy, WeightedCrossEntropy, FocalLoss, Flooding,
                              IFlooding, ClassWiseFlooding>;

struct LossResult {
  /// Scalar batch objective.
  double value = 0.0;
  /// d value / d logits, batch x K.
  Matrix grad_logits;
  /// Raw cross-entropy per sample, before any regularization.
  std::vector<double> per_sample_ce;
  /// Each sample's contribution to the objective; for every kind except
  /// weighted_ce the batch mean of these equals `value`. weighted_ce reports
  /// the raw CE here.
  std::vector<double> per_sample_loss;
};

LossKind kind_of(const LossSpec& spec);
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// The scalar hyperparameter that identifies a spec inside a grid: b for
/// flood/iflood, b_base for cwflood, gamma for focal, 0 otherwise.
double level_param(const LossSpec& spec);

/// Lower bound every batch value of this loss respects: b for flood and
/// iflood, min_k b_k for cwflood, 0 otherwise.
double loss_floor(const LossSpec& spec);

/// Throws ParameterError when the spec's parameters are out of range or do not
/// match num_classes.
void validate(const LossSpec& spec, std::size_t num_classes);

/// Row-wise softmax, stabilized by subtracting each row's maximum.
Matrix softmax(const Matrix& logits);

LossResult ce_loss(const Matrix& logits, std::span<const Label> labels);
LossResult flood_loss(const Matrix& logits, std::span<const Label> labels, double b);
LossResult iflood_loss(const Matrix& logits, std::span<const Label> labels, double b);
LossResult cwflood_loss(const Matrix& logits, std::span<const Label> labels,
                        const FloodingSchedule& schedule);
LossResult weighted_ce_loss(const Matrix& logits, std::span<const Label> labels,
                            std::span<const double> class_weights);
LossResult focal_loss(const Matrix& logits, std::span<const Label> labels, double gamma);

LossResult compute_loss(const LossSpec& spec, const Matrix& logits,
                        std::span<const Label> labels);

}  // namespace floodlab
