#include "floodlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace floodlab {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kTestStream = 0x7e57;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string where) : object_(object), where_(std::move(where)) {
    if (!object_.is_object()) throw ValidationError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void optional(const char* key, T& target) {
    seen_.insert(key);
    if (!object_.contains(key)) return;
    try {
      target = object_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void required(const char* key, T& target) {
    if (!object_.contains(key)) throw ValidationError(where_ + ": missing key '" + key + "'");
    optional(key, target);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return object_.contains(key) ? &object_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.contains(item.key())) {
        throw ValidationError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const json& object_;
  std::string where_;
  std::set<std::string> seen_;
};

bool is_flooding(LossKind kind) {
  return kind == LossKind::kFlood || kind == LossKind::kIFlood || kind == LossKind::kCwFlood;
}

std::uint64_t rho_stream(double rho) { return std::bit_cast<std::uint64_t>(rho); }

void check(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

// Per-rho data shared by every run of that rho.
struct RhoData {
  Dataset pool;  // long-tailed training pool, split per seed
  const Dataset* test = nullptr;
};

Dataset blobs_test_set(const DatasetConfig& ds) {
  Rng rng(derive_seed(ds.seed, kTestStream));
  return gen_blobs(rng, ds.classes, ds.dim, ClassCounts(ds.classes, ds.test_per_class), ds.spread);
}

Dataset longtail_pool(const DatasetConfig& ds, double rho, const Dataset* cifar_train) {
  Rng rng(derive_seed(ds.seed, rho_stream(rho)));
  if (ds.kind == "blobs") {
    const auto counts = longtail_counts({ds.classes, ds.n_max, rho});
    return gen_blobs(rng, ds.classes, ds.dim, counts, ds.spread);
  }
  return subsample_longtail(rng, *cifar_train, {kCifarClasses, ds.n_max, rho});
}

RunResult execute_run(const ExperimentConfig& config, const CellSpec& cell,
                      const LossGridEntry& entry, const RhoData& data, std::size_t run_id,
                      std::uint64_t seed) {
  RunResult result;
  result.run_id = run_id;
  result.cell_id = cell.cell_id;
  result.seed = seed;
  try {
    Rng split_rng(derive_seed(seed, kSplitStream));
    SplitPair split = stratified_split(split_rng, data.pool, config.val_frac);
    result.warnings = split.warnings;
    Dataset test_copy;
    const Dataset* test = data.test;
    if (config.dataset.kind == "cifar10") {
      const ChannelStats stats = compute_channel_stats(split.train);
      normalize_channels(split.train, stats);
      if (!split.val.empty()) normalize_channels(split.val, stats);
      test_copy = *data.test;
      normalize_channels(test_copy, stats);
      test = &test_copy;
    }

    std::vector<std::size_t> sizes{split.train.dim()};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(split.train.num_classes);
    Rng init_rng(derive_seed(seed, kInitStream));
    const MlpParams model0 = init_mlp(init_rng, sizes);

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.lr = config.lr;
    tc.momentum = config.momentum;
    tc.seed = seed;
    tc.eval_every = config.eval_every;
    tc.loss = resolve_loss(cell, entry, split.train.counts);

    TrainOutcome outcome = train(tc, split, model0);
    result.test = evaluate(outcome.best_params, *test);
    result.records = std::move(outcome.records);
    auto test_rows = evaluation_records(result.test, outcome.best_epoch, Split::kTest);
    result.records.insert(result.records.end(), test_rows.begin(), test_rows.end());
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const TrainRecord& a, const TrainRecord& b) {
                       if (a.epoch != b.epoch) return a.epoch < b.epoch;
                       if (a.split != b.split) return a.split < b.split;
                       return a.class_id < b.class_id;
                     });
    result.best_epoch = outcome.best_epoch;
    result.best_params = std::move(outcome.best_params);
    result.ok = true;
  } catch (const Error& e) {
    result.ok = false;
    result.error = e.what();
    result.records.clear();
  }
  return result;
}

std::string cifar_dir_problem(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty()) return "dataset.path is required for cifar10";
  if (!fs::is_directory(path)) return "dataset.path '" + path + "' is not a directory";
  for (auto part : {CifarPart::kTrain, CifarPart::kTest}) {
    for (const auto& name : cifar10_batch_files(part)) {
      if (!fs::is_regular_file(fs::path(path) / name)) {
        return "dataset.path '" + path + "' is missing " + name;
      }
    }
  }
  return {};
}

json config_json(const ExperimentConfig& c) {
  json ds = {{"kind", c.dataset.kind}, {"seed", c.dataset.seed}, {"n_max", c.dataset.n_max}};
  if (c.dataset.kind == "blobs") {
    ds["classes"] = c.dataset.classes;
    ds["dim"] = c.dataset.dim;
    ds["spread"] = c.dataset.spread;
    ds["test_per_class"] = c.dataset.test_per_class;
  } else {
    ds["path"] = c.dataset.path;
  }
  json losses = json::array();
  for (const auto& entry : c.losses) {
    json item = {{"kind", std::string(to_string(entry.kind))}};
    if (is_flooding(entry.kind)) item["levels"] = entry.levels;
    if (entry.kind == LossKind::kFocal) item["gamma"] = entry.gamma;
    losses.push_back(item);
  }
  return {
      {"dataset", ds},
      {"rho", c.rho},
      {"losses", losses},
      {"seeds", c.seeds},
      {"hidden", c.hidden},
      {"train",
       {{"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"lr", c.lr},
        {"momentum", c.momentum},
        {"eval_every", c.eval_every}}},
      {"val_frac", c.val_frac},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
  };
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  // A manifest carries the config that produced it.
  if (root.is_object() && root.contains("config") && root.contains("artifact")) {
    root = root.at("config");
  }

  ExperimentConfig config;
  ObjectReader top(root, "config");
  const json* ds_json = top.child("dataset");
  check(ds_json != nullptr, "config: missing key 'dataset'");
  ObjectReader ds(*ds_json, "dataset");
  ds.required("kind", config.dataset.kind);
  if (config.dataset.kind == "cifar10") config.dataset.n_max = 5000;
  ds.optional("classes", config.dataset.classes);
  ds.optional("dim", config.dataset.dim);
  ds.optional("n_max", config.dataset.n_max);
  ds.optional("spread", config.dataset.spread);
  ds.optional("test_per_class", config.dataset.test_per_class);
  ds.optional("seed", config.dataset.seed);
  ds.optional("path", config.dataset.path);
  ds.finish();

  top.required("rho", config.rho);
  top.required("seeds", config.seeds);
  top.optional("hidden", config.hidden);
  top.optional("val_frac", config.val_frac);
  top.optional("output_dir", config.output_dir);
  top.optional("workers", config.workers);

  const json* losses = top.child("losses");
  check(losses != nullptr && losses->is_array(), "config: 'losses' must be an array");
  for (std::size_t i = 0; i < losses->size(); ++i) {
    ObjectReader reader(losses->at(i), "losses[" + std::to_string(i) + "]");
    std::string kind;
    reader.required("kind", kind);
    LossGridEntry entry;
    try {
      entry.kind = parse_loss_kind(kind);
    } catch (const ParameterError& e) {
      throw ValidationError("losses[" + std::to_string(i) + "]: " + e.what());
    }
    if (is_flooding(entry.kind)) entry.levels = kDefaultLevels;
    reader.optional("levels", entry.levels);
    reader.optional("gamma", entry.gamma);
    reader.finish();
    config.losses.push_back(std::move(entry));
  }

  if (const json* tr = top.child("train")) {
    ObjectReader reader(*tr, "train");
    reader.optional("epochs", config.epochs);
    reader.optional("batch_size", config.batch_size);
    reader.optional("lr", config.lr);
    reader.optional("momentum", config.momentum);
    reader.optional("eval_every", config.eval_every);
    reader.finish();
  }
  top.finish();
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

void validate(const ExperimentConfig& c) {
  const auto& ds = c.dataset;
  check(ds.kind == "blobs" || ds.kind == "cifar10",
        "dataset.kind must be 'blobs' or 'cifar10', got '" + ds.kind + "'");
  check(ds.n_max >= 1, "dataset.n_max must be >= 1");
  if (ds.kind == "blobs") {
    check(ds.classes >= 2, "dataset.classes must be >= 2");
    check(ds.dim >= 1, "dataset.dim must be >= 1");
    check(ds.spread > 0.0 && std::isfinite(ds.spread), "dataset.spread must be > 0");
    check(ds.test_per_class >= 1, "dataset.test_per_class must be >= 1");
  } else {
    const std::string problem = cifar_dir_problem(ds.path);
    check(problem.empty(), problem);
  }
  check(!c.rho.empty(), "rho must be a non-empty list");
  for (double r : c.rho) check(r >= 1.0 && std::isfinite(r), "rho values must be >= 1");
  check(!c.losses.empty(), "losses must be a non-empty list");
  for (const auto& entry : c.losses) {
    if (is_flooding(entry.kind)) {
      check(!entry.levels.empty(), std::string(to_string(entry.kind)) + ": empty level grid");
      for (double b : entry.levels) {
        check(b >= 0.0 && std::isfinite(b), "flooding levels must be finite and >= 0");
      }
    }
    check(entry.gamma >= 0.0 && std::isfinite(entry.gamma), "focal gamma must be >= 0");
  }
  check(!c.seeds.empty(), "seeds must be a non-empty list");
  for (std::size_t h : c.hidden) check(h >= 1, "hidden layer sizes must be >= 1");
  check(c.epochs >= 1, "train.epochs must be >= 1");
  check(c.batch_size >= 1, "train.batch_size must be >= 1");
  check(c.lr > 0.0 && std::isfinite(c.lr), "train.lr must be > 0");
  check(c.momentum >= 0.0 && c.momentum < 1.0, "train.momentum must lie in [0, 1)");
  check(c.eval_every >= 1, "train.eval_every must be >= 1");
  check(c.val_frac > 0.0 && c.val_frac < 1.0, "val_frac must lie in (0, 1)");
  check(c.workers >= 1, "workers must be >= 1");
}

std::vector<CellSpec> expand_cells(const ExperimentConfig& config) {
  std::vector<CellSpec> cells;
  for (double rho : config.rho) {
    for (const auto& entry : config.losses) {
      std::vector<double> params{0.0};
      if (is_flooding(entry.kind)) params = entry.levels;
      if (entry.kind == LossKind::kFocal) params = {entry.gamma};
      for (double p : params) cells.push_back({cells.size(), rho, entry.kind, p});
    }
  }
  return cells;
}

LossSpec resolve_loss(const CellSpec& cell, const LossGridEntry& entry,
                      const ClassCounts& train_counts) {
  switch (cell.kind) {
    case LossKind::kCe: return CrossEntropy{};
    case LossKind::kWeightedCe: return WeightedCrossEntropy{class_weights(train_counts)};
    case LossKind::kFocal: return FocalLoss{entry.gamma};
    case LossKind::kFlood: return Flooding{cell.level_param};
    case LossKind::kIFlood: return IFlooding{cell.level_param};
    case LossKind::kCwFlood:
      return ClassWiseFlooding{flooding_schedule(cell.level_param, train_counts)};
  }
  throw ParameterError("resolve_loss: unknown loss kind");
}

GridResult run_grid(const ExperimentConfig& config, std::size_t workers) {
  validate(config);
  GridResult grid;
  grid.cells = expand_cells(config);

  // Which grid entry each cell came from.
  std::vector<const LossGridEntry*> entry_of;
  for (std::size_t r = 0; r < config.rho.size(); ++r) {
    for (const auto& entry : config.losses) {
      std::size_t n = 1;
      if (is_flooding(entry.kind)) n = entry.levels.size();
      for (std::size_t i = 0; i < n; ++i) entry_of.push_back(&entry);
    }
  }

  std::optional<Dataset> cifar_train;
  Dataset test;
  if (config.dataset.kind == "cifar10") {
    cifar_train = load_cifar10(config.dataset.path, CifarPart::kTrain);
    test = load_cifar10(config.dataset.path, CifarPart::kTest);
  } else {
    test = blobs_test_set(config.dataset);
  }
  std::map<double, RhoData> by_rho;
  for (double rho : config.rho) {
    if (by_rho.contains(rho)) continue;
    by_rho[rho] = RhoData{longtail_pool(config.dataset, rho, cifar_train ? &*cifar_train : nullptr),
                          &test};
  }
  cifar_train.reset();

  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& cell : grid.cells) {
    for (std::uint64_t seed : config.seeds) jobs.push_back({cell.cell_id, seed});
  }
  grid.runs.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const CellSpec& cell = grid.cells[jobs[j].cell];
      grid.runs[j] = execute_run(config, cell, *entry_of[cell.cell_id], by_rho.at(cell.rho), j,
                                 jobs[j].seed);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const std::string tag = config.dataset.kind;
  for (const auto& cell : grid.cells) {
    std::vector<RunAccuracies> accs;
    for (const auto& run : grid.runs) {
      if (run.cell_id != cell.cell_id || !run.ok) continue;
      RunAccuracies acc{run.seed, {}};
      for (const auto& a : run.test.class_accuracy) acc.class_accuracy.push_back(a.value_or(0.0));
      accs.push_back(std::move(acc));
    }
    if (accs.empty()) {
      grid.summaries.emplace_back();
      continue;
    }
    CellSummary summary = summarize(std::move(accs));
    summary.dataset = tag;
    summary.rho = cell.rho;
    summary.loss_kind = std::string(to_string(cell.kind));
    summary.level_param = cell.level_param;
    grid.summaries.push_back(std::move(summary));
  }
  return grid;
}

void write_curves_csv(std::ostream& out, const GridResult& grid) {
  out << "run_id,seed,loss_kind,level_param,rho,epoch,split,class_id,loss,accuracy\n";
  for (const auto& run : grid.runs) {
    if (!run.ok) continue;
    const CellSpec& cell = grid.cells[run.cell_id];
    const std::string prefix = std::to_string(run.run_id) + ',' + std::to_string(run.seed) + ',' +
                               std::string(to_string(cell.kind)) + ',' +
                               format_real(cell.level_param) + ',' + format_real(cell.rho) + ',';
    for (const auto& r : run.records) {
      out << prefix << r.epoch << ',' << to_string(r.split) << ',' << r.class_id << ','
          << format_real(r.loss) << ',' << format_real(r.accuracy) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const GridResult& grid) {
  std::size_t classes = 0;
  for (const auto& s : grid.summaries) {
    if (s) classes = std::max(classes, s->class_mean.size());
  }
  out << "cell_id,dataset,rho,loss_kind,level_param,seed_count,overall_mean,overall_std";
  for (std::size_t k = 0; k < classes; ++k) out << ",class_" << k << "_mean,class_" << k << "_std";
  out << '\n';
  for (std::size_t c = 0; c < grid.summaries.size(); ++c) {
    const auto& s = grid.summaries[c];
    if (!s) continue;
    out << c << ',' << s->dataset << ',' << format_real(s->rho) << ',' << s->loss_kind << ','
        << format_real(s->level_param) << ',' << s->seed_count << ','
        << format_real(s->overall_mean) << ',' << format_real(s->overall_std);
    for (std::size_t k = 0; k < s->class_mean.size(); ++k) {
      out << ',' << format_real(s->class_mean[k]) << ',' << format_real(s->class_std[k]);
    }
    out << '\n';
  }
}

void write_outputs(const ExperimentConfig& config, const GridResult& grid,
                   const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "checkpoints");

  json runs = json::array();
  json failures = json::array();
  for (const auto& run : grid.runs) {
    const CellSpec& cell = grid.cells[run.cell_id];
    json item = {{"run_id", run.run_id},
                 {"cell_id", run.cell_id},
                 {"seed", run.seed},
                 {"rho", cell.rho},
                 {"loss_kind", std::string(to_string(cell.kind))},
                 {"level_param", cell.level_param},
                 {"status", run.ok ? "ok" : "failed"}};
    if (run.ok) {
      const std::string name = "checkpoints/run_" + std::to_string(run.run_id) + ".bin";
      save_checkpoint(out_dir / name, run.best_params);
      item["checkpoint"] = name;
      item["best_epoch"] = run.best_epoch;
      item["test_mean_accuracy"] = run.test.mean_accuracy;
    } else {
      item["error"] = run.error;
      failures.push_back({{"run_id", run.run_id}, {"error", run.error}});
    }
    if (!run.warnings.empty()) item["warnings"] = run.warnings;
    runs.push_back(std::move(item));
  }

  {
    std::ofstream out(out_dir / "curves.csv", std::ios::binary);
    write_curves_csv(out, grid);
  }
  {
    std::ofstream out(out_dir / "summary.csv", std::ios::binary);
    write_summary_csv(out, grid);
  }
  json manifest = {
      {"artifact", "floodlab"},
      {"version", FLOODLAB_VERSION},
      {"format_version", 1},
      {"config", config_json(config)},
      {"outputs", {"curves.csv", "summary.csv"}},
      {"runs", runs},
      {"failures", failures},
  };
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw ValidationError("cannot write to output directory " + out_dir.string());
}

std::string export_levels(const ExperimentConfig& config) {
  validate(config);
  std::vector<double> bases;
  for (const auto& entry : config.losses) {
    if (entry.kind == LossKind::kCwFlood) {
      bases.insert(bases.end(), entry.levels.begin(), entry.levels.end());
    }
  }
  if (bases.empty()) bases = kDefaultLevels;
  const std::size_t classes =
      config.dataset.kind == "cifar10" ? kCifarClasses : config.dataset.classes;

  std::ostringstream out;
  for (double rho : config.rho) {
    ClassCounts counts = longtail_counts({classes, config.dataset.n_max, rho});
    for (auto& n : counts) n -= validation_share(n, config.val_frac);
    const std::size_t total = total_count(counts);
    for (double b_base : bases) {
      const FloodingSchedule schedule = flooding_schedule(b_base, counts);
      out << "# dataset=" << config.dataset.kind << " rho=" << format_real(rho)
          << " b_base=" << format_real(b_base) << '\n';
      out << "class,N_k,freq,b_k\n";
      double sum = 0.0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        sum += schedule.levels[k];
        out << k << ',' << counts[k] << ','
            << format_real(static_cast<double>(counts[k]) / static_cast<double>(total)) << ','
            << format_real(schedule.levels[k]) << '\n';
      }
      out << "sum," << total << ",1," << format_real(sum) << '\n';
    }
  }
  return out.str();
}

int run_command(const std::filesystem::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::size_t>& workers_override, std::ostream& log) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    if (out_override) config.output_dir = *out_override;
    if (workers_override) config.workers = *workers_override;
    validate(config);
    check(!config.output_dir.empty(), "no output directory (set output_dir or pass --out)");
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }

  const GridResult grid = run_grid(config, config.workers);
  write_outputs(config, grid, config.output_dir);
  std::size_t failed = 0;
  for (const auto& run : grid.runs) {
    if (!run.ok) {
      ++failed;
      log << "run " << run.run_id << " failed: " << run.error << '\n';
    }
  }
  log << grid.runs.size() - failed << "/" << grid.runs.size() << " runs completed; outputs in "
      << config.output_dir << '\n';
  return failed == 0 ? 0 : 3;
}

}  // namespace floodlab
