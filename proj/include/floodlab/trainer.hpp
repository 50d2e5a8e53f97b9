#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "floodlab/datasets.hpp"
#include "floodlab/losses.hpp"
#include "floodlab/model.hpp"

namespace floodlab {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  LossSpec loss = CrossEntropy{};
  std::size_t eval_every = 1;
};

/// train: the regularized objective. train_raw: plain cross-entropy of the
/// same mini-batches. val/test: cross-entropy of a full evaluation pass.
enum class Split { kTrain, kTrainRaw, kVal, kTest };

std::string_view to_string(Split split);

inline constexpr int kAllClasses = -1;

struct TrainRecord {
  std::size_t epoch = 0;
  Split split = Split::kTrain;
  int class_id = kAllClasses;
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const TrainRecord&) const = default;
};

struct TrainOutcome {
  MlpParams best_params;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  MlpParams final_params;
  std::vector<TrainRecord> records;
};

/// Per-class and class-averaged accuracy and raw cross-entropy. Classes with
/// no samples are reported as nullopt and left out of both means.
struct Evaluation {
  std::vector<std::optional<double>> class_accuracy;
  std::vector<std::optional<double>> class_ce;
  double mean_accuracy = 0.0;
  double mean_ce = 0.0;
  /// Fraction of all samples classified correctly.
  double sample_accuracy = 0.0;
};

/// Prediction is the argmax logit, ties going to the lowest class id.
Evaluation evaluate(const MlpParams& params, const Dataset& data);

/// Index of the largest entry of each row, first index on ties.
std::vector<Label> argmax_rows(const Matrix& logits);

void validate(const TrainConfig& cfg);

/// Mini-batch SGD with heavy-ball momentum: v <- mu v + g; theta <- theta - lr v.
///
/// Each epoch reshuffles the training set (the last batch may be short) and
/// logs train/train_raw records. Every eval_every epochs, and at the last
/// epoch, the validation split is evaluated; the checkpoint with the highest
/// class-averaged validation accuracy is kept (earliest epoch on ties).
///
/// Throws TrainingError if the loss or the parameters become non-finite.
TrainOutcome train(const TrainConfig& cfg, const SplitPair& split, const MlpParams& model0);

/// Records for one evaluation pass: one per present class plus the ALL row.
std::vector<TrainRecord> evaluation_records(const Evaluation& eval, std::size_t epoch,
                                            Split split);

}  // namespace floodlab
