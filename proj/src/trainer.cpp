#include "floodlab/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace floodlab {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr Eigen::Index kEvalChunk = 2048;

// Running sums for one epoch of training batches.
struct EpochTally {
  explicit EpochTally(std::size_t classes)
      : loss(classes, 0.0), ce(classes, 0.0), correct(classes, 0), seen(classes, 0) {}

  std::vector<double> loss;
  std::vector<double> ce;
  std::vector<std::size_t> correct;
  std::vector<std::size_t> seen;
  // Batch objectives accumulated as |B| * (value - floor), which is >= 0, so
  // the epoch average never drops below the floor through rounding.
  double objective_above_floor = 0.0;
  std::size_t samples = 0;
};

double class_mean(const std::vector<double>& sums, const std::vector<std::size_t>& seen) {
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (seen[k] == 0) continue;
    total += sums[k] / static_cast<double>(seen[k]);
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

void append_epoch_records(const EpochTally& tally, double floor, std::size_t epoch,
                          std::vector<TrainRecord>& records) {
  const std::size_t classes = tally.seen.size();
  std::vector<double> correct(classes);
  for (std::size_t k = 0; k < classes; ++k) correct[k] = static_cast<double>(tally.correct[k]);
  const double accuracy = class_mean(correct, tally.seen);

  records.push_back({epoch, Split::kTrain, kAllClasses,
                     floor + tally.objective_above_floor / static_cast<double>(tally.samples),
                     accuracy});
  for (std::size_t k = 0; k < classes; ++k) {
    if (tally.seen[k] == 0) continue;
    const auto n = static_cast<double>(tally.seen[k]);
    records.push_back({epoch, Split::kTrain, static_cast<int>(k), tally.loss[k] / n,
                       correct[k] / n});
  }
  records.push_back({epoch, Split::kTrainRaw, kAllClasses, class_mean(tally.ce, tally.seen),
                     accuracy});
  for (std::size_t k = 0; k < classes; ++k) {
    if (tally.seen[k] == 0) continue;
    const auto n = static_cast<double>(tally.seen[k]);
    records.push_back({epoch, Split::kTrainRaw, static_cast<int>(k), tally.ce[k] / n,
                       correct[k] / n});
  }
}

void momentum_step(MlpParams& params, MlpParams& velocity, const MlpParams& grads, double lr,
                   double momentum) {
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    velocity.weights[l] = momentum * velocity.weights[l] + grads.weights[l];
    velocity.biases[l] = momentum * velocity.biases[l] + grads.biases[l];
    params.weights[l] -= lr * velocity.weights[l];
    params.biases[l] -= lr * velocity.biases[l];
  }
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTrainRaw: return "train_raw";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::vector<Label> argmax_rows(const Matrix& logits) {
  std::vector<Label> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<Label>(best);
  }
  return out;
}

Evaluation evaluate(const MlpParams& params, const Dataset& data) {
  if (data.empty()) throw DimensionError("evaluate: empty dataset");
  const std::size_t classes = data.num_classes;
  std::vector<double> ce_sum(classes, 0.0);
  std::vector<std::size_t> correct(classes, 0);
  std::size_t total_correct = 0;
  const auto n = static_cast<Eigen::Index>(data.size());
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index rows = std::min(kEvalChunk, n - start);
    const Matrix logits = predict_logits(params, data.features.middleRows(start, rows));
    const std::span<const Label> labels(data.labels.data() + start, static_cast<std::size_t>(rows));
    const LossResult ce = ce_loss(logits, labels);
    const auto predicted = argmax_rows(logits);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto k = static_cast<std::size_t>(labels[i]);
      ce_sum[k] += ce.per_sample_ce[i];
      if (predicted[i] == labels[i]) {
        ++correct[k];
        ++total_correct;
      }
    }
  }

  Evaluation eval;
  eval.class_accuracy.resize(classes);
  eval.class_ce.resize(classes);
  double acc_sum = 0.0;
  double ce_total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (data.counts[k] == 0) continue;
    const auto count = static_cast<double>(data.counts[k]);
    eval.class_accuracy[k] = static_cast<double>(correct[k]) / count;
    eval.class_ce[k] = ce_sum[k] / count;
    acc_sum += *eval.class_accuracy[k];
    ce_total += *eval.class_ce[k];
    ++present;
  }
  eval.mean_accuracy = acc_sum / static_cast<double>(present);
  eval.mean_ce = ce_total / static_cast<double>(present);
  eval.sample_accuracy = static_cast<double>(total_correct) / static_cast<double>(data.size());
  return eval;
}

std::vector<TrainRecord> evaluation_records(const Evaluation& eval, std::size_t epoch,
                                            Split split) {
  std::vector<TrainRecord> records;
  records.push_back({epoch, split, kAllClasses, eval.mean_ce, eval.mean_accuracy});
  for (std::size_t k = 0; k < eval.class_accuracy.size(); ++k) {
    if (!eval.class_accuracy[k]) continue;
    records.push_back({epoch, split, static_cast<int>(k), *eval.class_ce[k],
                       *eval.class_accuracy[k]});
  }
  return records;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ParameterError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
  if (cfg.eval_every < 1) throw ParameterError("train: eval_every must be >= 1");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw ParameterError("train: lr must be finite and >= 0");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ParameterError("train: momentum must lie in [0, 1)");
  }
}

TrainOutcome train(const TrainConfig& cfg, const SplitPair& split, const MlpParams& model0) {
  validate(cfg);
  const Dataset& data = split.train;
  if (data.empty()) throw ParameterError("train: empty training split");
  if (model0.output_dim() != data.num_classes) {
    throw DimensionError("train: model has " + std::to_string(model0.output_dim()) +
                         " outputs for " + std::to_string(data.num_classes) + " classes");
  }
  validate(cfg.loss, data.num_classes);

  const double floor = loss_floor(cfg.loss);
  Rng rng(derive_seed(cfg.seed, kShuffleStream));
  MlpParams params = model0;
  MlpParams velocity = zeros_like(model0);

  TrainOutcome outcome;
  bool have_best = false;
  const std::size_t n = data.size();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = rng_shuffle(rng, n);
    EpochTally tally(data.num_classes);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      Matrix x(static_cast<Eigen::Index>(rows.size()), data.features.cols());
      std::vector<Label> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(rows[i]));
        labels[i] = data.labels[rows[i]];
      }

      ForwardResult fwd = forward(params, x);
      const LossResult loss = compute_loss(cfg.loss, fwd.logits, labels);
      if (!std::isfinite(loss.value) || !loss.grad_logits.allFinite()) {
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
      const MlpParams grads = backward(params, fwd.trace, loss.grad_logits);
      momentum_step(params, velocity, grads, cfg.lr, cfg.momentum);
      if (!all_finite(params)) {
        throw TrainingError("training diverged: non-finite parameters after epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }

      const auto predicted = argmax_rows(fwd.logits);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto k = static_cast<std::size_t>(labels[i]);
        tally.loss[k] += loss.per_sample_loss[i];
        tally.ce[k] += loss.per_sample_ce[i];
        tally.seen[k] += 1;
        if (predicted[i] == labels[i]) tally.correct[k] += 1;
      }
      tally.objective_above_floor += static_cast<double>(labels.size()) * (loss.value - floor);
      tally.samples += labels.size();
    }
    append_epoch_records(tally, floor, epoch, outcome.records);

    const bool eval_now = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
    if (eval_now && !split.val.empty()) {
      const Evaluation eval = evaluate(params, split.val);
      auto rows = evaluation_records(eval, epoch, Split::kVal);
      outcome.records.insert(outcome.records.end(), rows.begin(), rows.end());
      if (!have_best || eval.mean_accuracy > outcome.best_val_accuracy) {
        have_best = true;
        outcome.best_val_accuracy = eval.mean_accuracy;
        outcome.best_epoch = epoch;
        outcome.best_params = params;
      }
    }
  }
  if (!have_best) {
    outcome.best_epoch = cfg.epochs;
    outcome.best_params = params;
  }
  outcome.final_params = std::move(params);
  return outcome;
}

}  // namespace floodlab
