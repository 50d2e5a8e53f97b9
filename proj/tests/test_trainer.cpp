#include <cmath>

#include "doctest.h"
#include "floodlab/trainer.hpp"
#include "oracles.hpp"

using namespace floodlab;

namespace {

SplitPair blob_split(std::uint64_t seed, const ClassCounts& counts, double spread,
                     std::size_t dim = 2) {
  Rng rng(seed);
  const Dataset data = gen_blobs(rng, counts.size(), dim, counts, spread);
  Rng split_rng(seed + 1);
  return stratified_split(split_rng, data, 0.1);
}

MlpParams model_for(const SplitPair& split, std::uint64_t seed, std::vector<std::size_t> hidden = {16}) {
  std::vector<std::size_t> sizes{split.train.dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(split.train.num_classes);
  Rng rng(seed);
  return init_mlp(rng, sizes);
}

const TrainRecord* find(const std::vector<TrainRecord>& records, std::size_t epoch, Split split,
                        int class_id) {
  for (const auto& r : records) {
    if (r.epoch == epoch && r.split == split && r.class_id == class_id) return &r;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("lr = 0 leaves parameters untouched") {
  const SplitPair split = blob_split(1, {60, 40, 20}, 0.4);
  const MlpParams model0 = model_for(split, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.lr = 0.0;
  const TrainOutcome out = train(cfg, split, model0);
  CHECK(out.final_params == model0);
  CHECK(out.best_params == model0);
}

TEST_CASE("full-batch step without momentum is plain gradient descent") {
  const SplitPair split = blob_split(3, {30, 30}, 0.5);
  const MlpParams model0 = model_for(split, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = split.train.size();
  cfg.momentum = 0.0;
  cfg.lr = 0.1;
  const TrainOutcome out = train(cfg, split, model0);

  const auto fwd = forward(model0, split.train.features);
  const auto loss = ce_loss(fwd.logits, split.train.labels);
  const auto grad = flatten(backward(model0, fwd.trace, loss.grad_logits));
  const auto before = flatten(model0);
  const auto after = flatten(out.final_params);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(after[i] == doctest::Approx(before[i] - 0.1 * grad[i]).epsilon(1e-12));
  }
  // The logged regularized loss is that batch's objective.
  CHECK(find(out.records, 1, Split::kTrain, kAllClasses)->loss ==
        doctest::Approx(loss.value).epsilon(1e-12));
}

TEST_CASE("training is deterministic") {
  const SplitPair split = blob_split(5, {80, 40, 20, 10}, 0.6);
  const MlpParams model0 = model_for(split, 6);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  cfg.seed = 99;
  cfg.loss = IFlooding{0.1};
  const TrainOutcome a = train(cfg, split, model0);
  const TrainOutcome b = train(cfg, split, model0);
  CHECK(a.records == b.records);
  CHECK(a.final_params == b.final_params);
  CHECK(a.best_epoch == b.best_epoch);
  cfg.seed = 100;
  CHECK(train(cfg, split, model0).final_params != a.final_params);
}

TEST_CASE("flooding floor holds in every logged training epoch") {
  const SplitPair split = blob_split(7, {100, 60, 30}, 0.05);
  const MlpParams model0 = model_for(split, 8);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 16;
  cfg.lr = 0.1;
  const std::vector<LossSpec> specs{Flooding{0.1}, IFlooding{0.05},
                                    ClassWiseFlooding{flooding_schedule(0.3, split.train.counts)}};
  for (const auto& spec : specs) {
    cfg.loss = spec;
    const double floor = loss_floor(spec);
    const TrainOutcome out = train(cfg, split, model0);
    for (const auto& r : out.records) {
      if (r.split == Split::kTrain && r.class_id == kAllClasses) CHECK(r.loss >= floor);
    }
  }
}

TEST_CASE("flooding matches cross-entropy until a level is reached") {
  const SplitPair split = blob_split(9, {50, 30, 20}, 0.8);
  const MlpParams model0 = model_for(split, 10);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 10;
  cfg.lr = 0.01;
  cfg.seed = 3;
  const TrainOutcome ce = train(cfg, split, model0);
  for (const LossSpec& spec : std::vector<LossSpec>{
           Flooding{1e-6}, IFlooding{1e-6},
           ClassWiseFlooding{flooding_schedule(1e-6, split.train.counts)}}) {
    cfg.loss = spec;
    const TrainOutcome fl = train(cfg, split, model0);
    CHECK(fl.final_params == ce.final_params);
    for (std::size_t i = 0; i < ce.records.size(); ++i) {
      if (ce.records[i].split == Split::kTrain && ce.records[i].class_id == kAllClasses) continue;
      CHECK(fl.records[i] == ce.records[i]);
    }
  }
}

TEST_CASE("best model re-evaluates to the recorded validation accuracy") {
  const SplitPair split = blob_split(11, {120, 60, 30, 15}, 0.7);
  const MlpParams model0 = model_for(split, 12);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  cfg.eval_every = 3;
  const TrainOutcome out = train(cfg, split, model0);
  const Evaluation eval = evaluate(out.best_params, split.val);
  CHECK(eval.mean_accuracy == out.best_val_accuracy);
  const TrainRecord* rec = find(out.records, out.best_epoch, Split::kVal, kAllClasses);
  REQUIRE(rec != nullptr);
  CHECK(rec->accuracy == out.best_val_accuracy);

  double best = -1.0;
  std::size_t first_best = 0;
  for (const auto& r : out.records) {
    if (r.split != Split::kVal || r.class_id != kAllClasses) continue;
    CHECK((r.epoch % 3 == 0 || r.epoch == 20));
    if (r.accuracy > best) {
      best = r.accuracy;
      first_best = r.epoch;
    }
  }
  CHECK(first_best == out.best_epoch);
}

TEST_CASE("tiny spread is learned perfectly") {
  const SplitPair split = blob_split(13, {40, 40, 40, 40, 40}, 1e-3);
  const MlpParams model0 = model_for(split, 14, {16, 16});
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  const TrainOutcome out = train(cfg, split, model0);
  const Evaluation eval = evaluate(out.final_params, split.train);
  CHECK(eval.mean_accuracy == 1.0);
  CHECK(eval.sample_accuracy == 1.0);
}

TEST_CASE("evaluate: tie-breaking, absent classes and balance") {
  const SplitPair split = blob_split(15, {20, 20, 20}, 0.5);
  const MlpParams zero = zeros_like(model_for(split, 16));
  const Evaluation eval = evaluate(zero, split.train);
  CHECK(*eval.class_accuracy[0] == 1.0);
  CHECK(*eval.class_accuracy[1] == 0.0);
  CHECK(eval.mean_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(*eval.class_ce[2] == doctest::Approx(std::log(3.0)));
  // Balanced data: class mean equals sample accuracy.
  CHECK(eval.mean_accuracy == doctest::Approx(eval.sample_accuracy));

  Matrix x = Matrix::Zero(4, 2);
  const Dataset missing = make_dataset(x, {0, 0, 2, 2}, 3);
  const Evaluation partial = evaluate(zero, missing);
  CHECK_FALSE(partial.class_accuracy[1].has_value());
  CHECK(partial.mean_accuracy == doctest::Approx(0.5));
  const auto rows = evaluation_records(partial, 4, Split::kTest);
  CHECK(rows.size() == 3);

  CHECK(argmax_rows((Matrix(1, 3) << 2.0, 2.0, 1.0).finished())[0] == 0);
  CHECK_THROWS_AS(evaluate(zero, make_dataset(Matrix::Zero(0, 2), {}, 3)), DimensionError);
}

TEST_CASE("divergence is reported with epoch and batch") {
  const SplitPair split = blob_split(17, {30, 30}, 0.5);
  MlpParams model0 = model_for(split, 18);
  model0.weights[0] *= 1e150;
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.lr = 1e150;
  try {
    train(cfg, split, model0);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  const SplitPair split = blob_split(19, {10, 10}, 0.5);
  const MlpParams model0 = model_for(split, 20);
  TrainConfig cfg;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(train(cfg, split, model0), ParameterError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg, split, model0), ParameterError);
  cfg = {};
  cfg.loss = ClassWiseFlooding{FloodingSchedule{0.1, {0.1}}};
  CHECK_THROWS_AS(train(cfg, split, model0), ScheduleError);
  cfg = {};
  MlpParams wrong = model0;
  wrong.layer_sizes.back() = 3;
  CHECK_THROWS(train(cfg, split, wrong));
}

TEST_CASE("records cover every split and class each epoch") {
  const SplitPair split = blob_split(21, {30, 20, 10}, 0.5);
  const MlpParams model0 = model_for(split, 22);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 7;
  const TrainOutcome out = train(cfg, split, model0);
  for (std::size_t epoch = 1; epoch <= 2; ++epoch) {
    for (Split s : {Split::kTrain, Split::kTrainRaw, Split::kVal}) {
      for (int k = kAllClasses; k < 3; ++k) CHECK(find(out.records, epoch, s, k) != nullptr);
    }
  }
  CHECK(to_string(Split::kTrainRaw) == "train_raw");
}
