#include "floodlab/losses.hpp"

#include <algorithm>
#include <cmath>

namespace floodlab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_level(double b, const char* what) {
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw ParameterError(std::string(what) + ": flooding level must be finite and >= 0, got " +
                         std::to_string(b));
  }
}

// Softmax probabilities and per-sample cross-entropy from one stable pass.
struct CeParts {
  Matrix probs;
  std::vector<double> ce;
};

CeParts cross_entropy_parts(const Matrix& logits, std::span<const Label> labels) {
  const auto n = static_cast<std::size_t>(logits.rows());
  const auto k = logits.cols();
  if (n == 0) throw DimensionError("loss: empty batch");
  if (labels.size() != n) {
    throw DimensionError("loss: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits));
  }
  CeParts parts{Matrix(logits.rows(), k), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const Label y = labels[i];
    if (y < 0 || y >= k) {
      throw LabelError("loss: label " + std::to_string(y) + " at index " + std::to_string(i) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    const auto row = static_cast<Eigen::Index>(i);
    const double max = logits.row(row).maxCoeff();
    parts.probs.row(row) = (logits.row(row).array() - max).exp().matrix();
    const double sum = parts.probs.row(row).sum();
    parts.probs.row(row) /= sum;
    parts.ce[i] = max + std::log(sum) - logits(row, y);
  }
  return parts;
}

// (softmax - onehot) / |B|, the gradient of the batch-mean cross-entropy.
Matrix mean_ce_gradient(const CeParts& parts, std::span<const Label> labels) {
  Matrix grad = parts.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    grad(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  }
  grad /= static_cast<double>(labels.size());
  return grad;
}

double mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// |x - level| + level, written so that x >= level returns x bit-for-bit.
double flooded(double x, double level) { return x >= level ? x : (level - x) + level; }

// Shared evaluation of the per-sample flooding family. With per-sample levels
// b_i, sum_i |l_i - b_i| = |sum_i (l_i - b_i)| + 2 min(P, M), where P and M
// collect the positive and negative deviations. Writing the objective as
// flooded(mean l, mean b) + 2 min(P, M) / |B| keeps it exactly >= the batch
// flood value and exactly equal to mean l when no sample sits below its level.
LossResult per_sample_flood(CeParts parts, std::span<const Label> labels,
                            const std::vector<double>& levels) {
  const std::size_t n = labels.size();
  const double min_level = *std::min_element(levels.begin(), levels.end());
  double excess = 0.0;
  for (double b : levels) excess += b - min_level;
  const double mean_level = min_level + excess / static_cast<double>(n);

  double above = 0.0;
  double below = 0.0;
  LossResult out;
  out.grad_logits = mean_ce_gradient(parts, labels);
  out.per_sample_loss.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = parts.ce[i] - levels[i];
    if (dev > 0.0) {
      above += dev;
    } else if (dev < 0.0) {
      below -= dev;
    }
    const double s = sign(dev);
    if (s != 1.0) out.grad_logits.row(static_cast<Eigen::Index>(i)) *= s;
    out.per_sample_loss[i] = flooded(parts.ce[i], levels[i]);
  }
  const double mean_ce = mean(parts.ce);
  out.value = flooded(mean_ce, mean_level) + 2.0 * std::min(above, below) / static_cast<double>(n);
  out.per_sample_ce = std::move(parts.ce);
  return out;
}

}  // namespace

LossKind kind_of(const LossSpec& spec) {
  return std::visit(Overloaded{
                        [](const CrossEntropy&) { return LossKind::kCe; },
                        [](const WeightedCrossEntropy&) { return LossKind::kWeightedCe; },
                        [](const FocalLoss&) { return LossKind::kFocal; },
                        [](const Flooding&) { return LossKind::kFlood; },
                        [](const IFlooding&) { return LossKind::kIFlood; },
                        [](const ClassWiseFlooding&) { return LossKind::kCwFlood; },
                    },
                    spec);
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCe: return "ce";
    case LossKind::kWeightedCe: return "weighted_ce";
    case LossKind::kFocal: return "focal";
    case LossKind::kFlood: return "flood";
    case LossKind::kIFlood: return "iflood";
    case LossKind::kCwFlood: return "cwflood";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : {LossKind::kCe, LossKind::kWeightedCe, LossKind::kFocal, LossKind::kFlood,
                    LossKind::kIFlood, LossKind::kCwFlood}) {
    if (to_string(kind) == name) return kind;
  }
  throw ParameterError("unknown loss kind '" + std::string(name) + "'");
}

double level_param(const LossSpec& spec) {
  return std::visit(Overloaded{
                        [](const CrossEntropy&) { return 0.0; },
                        [](const WeightedCrossEntropy&) { return 0.0; },
                        [](const FocalLoss& f) { return f.gamma; },
                        [](const Flooding& f) { return f.b; },
                        [](const IFlooding& f) { return f.b; },
                        [](const ClassWiseFlooding& f) { return f.schedule.b_base; },
                    },
                    spec);
}

double loss_floor(const LossSpec& spec) {
  return std::visit(Overloaded{
                        [](const Flooding& f) { return f.b; },
                        [](const IFlooding& f) { return f.b; },
                        [](const ClassWiseFlooding& f) { return f.schedule.min_level(); },
                        [](const auto&) { return 0.0; },
                    },
                    spec);
}

void validate(const LossSpec& spec, std::size_t num_classes) {
  std::visit(Overloaded{
                 [](const CrossEntropy&) {},
                 [&](const WeightedCrossEntropy& w) {
                   if (w.class_weights.size() != num_classes) {
                     throw ParameterError("weighted_ce: " + std::to_string(w.class_weights.size()) +
                                          " weights for " + std::to_string(num_classes) +
                                          " classes");
                   }
                   for (double x : w.class_weights) {
                     if (!(x > 0.0) || !std::isfinite(x)) {
                       throw ParameterError("weighted_ce: class weights must be positive");
                     }
                   }
                 },
                 [](const FocalLoss& f) {
                   if (!(f.gamma >= 0.0) || !std::isfinite(f.gamma)) {
                     throw ParameterError("focal: gamma must be finite and >= 0");
                   }
                 },
                 [](const Flooding& f) { require_level(f.b, "flood"); },
                 [](const IFlooding& f) { require_level(f.b, "iflood"); },
                 [&](const ClassWiseFlooding& f) {
                   if (f.schedule.levels.size() != num_classes) {
                     throw ScheduleError("cwflood: schedule has " +
                                         std::to_string(f.schedule.levels.size()) +
                                         " levels for " + std::to_string(num_classes) +
                                         " classes");
                   }
                   for (double b : f.schedule.levels) require_level(b, "cwflood");
                 },
             },
             spec);
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - max).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

LossResult ce_loss(const Matrix& logits, std::span<const Label> labels) {
  CeParts parts = cross_entropy_parts(logits, labels);
  LossResult out;
  out.value = mean(parts.ce);
  out.grad_logits = mean_ce_gradient(parts, labels);
  out.per_sample_loss = parts.ce;
  out.per_sample_ce = std::move(parts.ce);
  return out;
}

LossResult flood_loss(const Matrix& logits, std::span<const Label> labels, double b) {
  require_level(b, "flood");
  LossResult out = ce_loss(logits, labels);
  const double s = sign(out.value - b);
  if (s != 1.0) out.grad_logits *= s;
  out.value = flooded(out.value, b);
  for (std::size_t i = 0; i < out.per_sample_loss.size(); ++i) {
    out.per_sample_loss[i] = s * (out.per_sample_ce[i] - b) + b;
  }
  return out;
}

LossResult iflood_loss(const Matrix& logits, std::span<const Label> labels, double b) {
  require_level(b, "iflood");
  CeParts parts = cross_entropy_parts(logits, labels);
  return per_sample_flood(std::move(parts), labels, std::vector<double>(labels.size(), b));
}

LossResult cwflood_loss(const Matrix& logits, std::span<const Label> labels,
                        const FloodingSchedule& schedule) {
  CeParts parts = cross_entropy_parts(logits, labels);
  std::vector<double> levels(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= schedule.levels.size()) {
      throw ScheduleError("cwflood: no flooding level for class " + std::to_string(y) +
                          " (schedule covers " + std::to_string(schedule.levels.size()) +
                          " classes)");
    }
    levels[i] = schedule.levels[y];
    require_level(levels[i], "cwflood");
  }
  return per_sample_flood(std::move(parts), labels, levels);
}

LossResult weighted_ce_loss(const Matrix& logits, std::span<const Label> labels,
                            std::span<const double> class_weights) {
  validate(WeightedCrossEntropy{{class_weights.begin(), class_weights.end()}},
           static_cast<std::size_t>(logits.cols()));
  CeParts parts = cross_entropy_parts(logits, labels);
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = class_weights[static_cast<std::size_t>(labels[i])];
    weight_sum += w;
    weighted += w * parts.ce[i];
  }
  LossResult out;
  out.value = weighted / weight_sum;
  out.grad_logits = parts.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.grad_logits(row, labels[i]) -= 1.0;
    out.grad_logits.row(row) *= class_weights[static_cast<std::size_t>(labels[i])] / weight_sum;
  }
  out.per_sample_loss = parts.ce;
  out.per_sample_ce = std::move(parts.ce);
  return out;
}

LossResult focal_loss(const Matrix& logits, std::span<const Label> labels, double gamma) {
  validate(FocalLoss{gamma}, static_cast<std::size_t>(logits.cols()));
  CeParts parts = cross_entropy_parts(logits, labels);
  const auto n = static_cast<double>(labels.size());
  LossResult out;
  out.grad_logits = mean_ce_gradient(parts, labels);
  out.per_sample_loss.resize(labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double ce = parts.ce[i];
    const double p_true = parts.probs(row, labels[i]);
    const double q = 1.0 - p_true;
    const double modulator = std::pow(q, gamma);
    out.per_sample_loss[i] = modulator * ce;
    sum += out.per_sample_loss[i];
    // d loss / d z = (softmax - onehot) * (q^g - g p q^(g-1) log p).
    double slope = 0.0;
    if (gamma != 0.0 && q > 0.0) slope = gamma * p_true * std::pow(q, gamma - 1.0) * -ce;
    const double factor = modulator - slope;
    if (factor != 1.0) out.grad_logits.row(row) *= factor;
  }
  out.value = sum / n;
  out.per_sample_ce = std::move(parts.ce);
  return out;
}

LossResult compute_loss(const LossSpec& spec, const Matrix& logits,
                        std::span<const Label> labels) {
  return std::visit(
      Overloaded{
          [&](const CrossEntropy&) { return ce_loss(logits, labels); },
          [&](const WeightedCrossEntropy& w) {
            return weighted_ce_loss(logits, labels, w.class_weights);
          },
          [&](const FocalLoss& f) { return focal_loss(logits, labels, f.gamma); },
          [&](const Flooding& f) { return flood_loss(logits, labels, f.b); },
          [&](const IFlooding& f) { return iflood_loss(logits, labels, f.b); },
          [&](const ClassWiseFlooding& f) { return cwflood_loss(logits, labels, f.schedule); },
      },
      spec);
}

}  // namespace floodlab
