#include "floodlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

namespace floodlab {

Dataset make_dataset(Matrix features, std::vector<Label> labels, std::size_t num_classes) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DimensionError("dataset: " + std::to_string(labels.size()) + " labels for features " +
                         shape_string(features));
  }
  Dataset data;
  data.num_classes = num_classes;
  data.counts.assign(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw LabelError("dataset: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++data.counts[static_cast<std::size_t>(labels[i])];
  }
  data.features = std::move(features);
  data.labels = std::move(labels);
  return data;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Matrix rows(static_cast<Eigen::Index>(indices.size()), features.cols());
  std::vector<Label> picked(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) {
      throw DimensionError("dataset subset: index " + std::to_string(indices[i]) +
                           " out of range for " + std::to_string(size()) + " rows");
    }
    rows.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
    picked[i] = labels[indices[i]];
  }
  return make_dataset(std::move(rows), std::move(picked), num_classes);
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  return by_class;
}

}  // namespace

Matrix blob_centers(std::size_t num_classes, std::size_t dim) {
  if (dim == 0) throw ParameterError("blob_centers: dimension must be >= 1");
  Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(num_classes),
                                static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    if (dim >= num_classes) {
      centers(row, row) = 1.0;
    } else if (dim >= 2) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
      centers(row, 0) = std::cos(angle);
      centers(row, 1) = std::sin(angle);
    } else {
      centers(row, 0) =
          -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(num_classes - 1);
    }
  }
  return centers;
}

Dataset gen_blobs(Rng& rng, std::size_t num_classes, std::size_t dim, const ClassCounts& counts,
                  double spread) {
  if (num_classes < 2) throw ParameterError("gen_blobs: need at least 2 classes");
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw ParameterError("gen_blobs: spread must be finite and > 0");
  }
  if (counts.size() != num_classes) {
    throw ParameterError("gen_blobs: " + std::to_string(counts.size()) + " counts for " +
                         std::to_string(num_classes) + " classes");
  }
  const Matrix centers = blob_centers(num_classes, dim);
  const std::size_t n = total_count(counts);
  Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<Label> labels;
  labels.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::vector<double> noise = rng_gauss(rng, counts[k] * dim, 0.0, spread);
    for (std::size_t i = 0; i < counts[k]; ++i, ++row) {
      for (std::size_t j = 0; j < dim; ++j) {
        features(row, static_cast<Eigen::Index>(j)) =
            centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) +
            noise[i * dim + j];
      }
      labels.push_back(static_cast<Label>(k));
    }
  }
  return make_dataset(std::move(features), std::move(labels), num_classes);
}

Dataset subsample_longtail(Rng& rng, const Dataset& src, const LongTailSpec& spec) {
  if (spec.num_classes != src.num_classes) {
    throw ParameterError("subsample_longtail: spec has " + std::to_string(spec.num_classes) +
                         " classes, dataset has " + std::to_string(src.num_classes));
  }
  const ClassCounts wanted = longtail_counts(spec);
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    if (wanted[k] > src.counts[k]) {
      throw CapacityError("subsample_longtail: class " + std::to_string(k) + " needs " +
                          std::to_string(wanted[k]) + " samples but only " +
                          std::to_string(src.counts[k]) + " are available");
    }
  }
  const auto by_class = indices_by_class(src);
  std::vector<std::size_t> keep;
  keep.reserve(total_count(wanted));
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    const auto perm = rng_shuffle(rng, by_class[k].size());
    for (std::size_t i = 0; i < wanted[k]; ++i) keep.push_back(by_class[k][perm[i]]);
  }
  std::sort(keep.begin(), keep.end());
  return src.subset(keep);
}

std::size_t validation_share(std::size_t n, double val_frac) {
  if (n < 2) return 0;
  const std::size_t share = round_half_up(val_frac * static_cast<double>(n));
  return std::clamp<std::size_t>(share, 1, n - 1);
}

SplitPair stratified_split(Rng& rng, const Dataset& src, double val_frac) {
  if (!(val_frac > 0.0 && val_frac < 1.0)) {
    throw ParameterError("stratified_split: val_frac must lie in (0, 1), got " +
                         std::to_string(val_frac));
  }
  SplitPair split;
  const auto by_class = indices_by_class(src);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    const auto& members = by_class[k];
    if (members.size() == 1) {
      split.warnings.push_back("class " + std::to_string(k) +
                               " has a single sample; it stays in the training split");
    }
    const std::size_t n_val = validation_share(members.size(), val_frac);
    const auto perm = rng_shuffle(rng, members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_val ? split.val_indices : split.train_indices).push_back(members[perm[i]]);
    }
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.val_indices.begin(), split.val_indices.end());
  split.train = src.subset(split.train_indices);
  split.val = src.subset(split.val_indices);
  return split;
}

std::vector<CifarRecord> parse_cifar10_records(std::span<const std::uint8_t> bytes,
                                               const std::string& source) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(source + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the 3073-byte record size");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  std::vector<CifarRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto record = bytes.subspan(i * kCifarRecordBytes, kCifarRecordBytes);
    if (record[0] >= kCifarClasses) {
      throw FormatError(source + ": record " + std::to_string(i) + " has label byte " +
                        std::to_string(record[0]) + " (expected 0-9)");
    }
    records[i].label = record[0];
    std::copy(record.begin() + 1, record.end(), records[i].pixels.begin());
  }
  return records;
}

std::vector<std::uint8_t> serialize_cifar10_records(std::span<const CifarRecord> records) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(records.size() * kCifarRecordBytes);
  for (const auto& r : records) {
    bytes.push_back(r.label);
    bytes.insert(bytes.end(), r.pixels.begin(), r.pixels.end());
  }
  return bytes;
}

std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 batch " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_cifar10_records(bytes, path.string());
}

std::vector<std::string> cifar10_batch_files(CifarPart part) {
  if (part == CifarPart::kTest) return {"test_batch.bin"};
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
          "data_batch_5.bin"};
}

Dataset cifar_records_to_dataset(std::span<const CifarRecord> records) {
  Matrix features(static_cast<Eigen::Index>(records.size()),
                  static_cast<Eigen::Index>(kCifarPixels));
  std::vector<Label> labels(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kCifarPixels; ++j) {
      features(row, static_cast<Eigen::Index>(j)) = records[i].pixels[j] / 255.0;
    }
    labels[i] = records[i].label;
  }
  return make_dataset(std::move(features), std::move(labels), kCifarClasses);
}

Dataset load_cifar10(const std::filesystem::path& dir, CifarPart part) {
  // Parse every file before building the dataset so a bad batch leaves nothing behind.
  std::vector<CifarRecord> records;
  for (const auto& name : cifar10_batch_files(part)) {
    auto batch = read_cifar10_file(dir / name);
    records.insert(records.end(), batch.begin(), batch.end());
  }
  return cifar_records_to_dataset(records);
}

ChannelStats compute_channel_stats(const Dataset& data) {
  if (data.dim() != kCifarPixels) {
    throw DimensionError("compute_channel_stats: expected 3072 features, got " +
                         std::to_string(data.dim()));
  }
  if (data.empty()) throw DimensionError("compute_channel_stats: empty dataset");
  constexpr Eigen::Index plane = kCifarPixels / 3;
  ChannelStats stats;
  for (Eigen::Index c = 0; c < 3; ++c) {
    const auto block = data.features.middleCols(c * plane, plane);
    const double mean = block.mean();
    const double var = (block.array() - mean).square().mean();
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.std[static_cast<std::size_t>(c)] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

void normalize_channels(Dataset& data, const ChannelStats& stats) {
  if (data.dim() != kCifarPixels) {
    throw DimensionError("normalize_channels: expected 3072 features, got " +
                         std::to_string(data.dim()));
  }
  constexpr Eigen::Index plane = kCifarPixels / 3;
  for (Eigen::Index c = 0; c < 3; ++c) {
    auto block = data.features.middleCols(c * plane, plane);
    const auto idx = static_cast<std::size_t>(c);
    block = ((block.array() - stats.mean[idx]) / stats.std[idx]).matrix();
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      out << ',' << format_real(data.features(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

}  // namespace floodlab
