#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "floodlab/imbalance.hpp"
#include "floodlab/losses.hpp"
#include "floodlab/numkit.hpp"

namespace floodlab {

/// Feature matrix (one sample per row) with integer labels and per-class counts.
struct Dataset {
  Matrix features;
  std::vector<Label> labels;
  std::size_t num_classes = 0;
  ClassCounts counts;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool empty() const { return labels.empty(); }

  /// Rows in the given order; counts are recomputed.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Builds a Dataset and checks labels against num_classes.
Dataset make_dataset(Matrix features, std::vector<Label> labels, std::size_t num_classes);

/// Train/validation partition. The index vectors refer to rows of the source
/// dataset and are sorted ascending.
struct SplitPair {
  Dataset train;
  Dataset val;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::string> warnings;
};

/// Unit-norm class centers: scaled basis vectors when d >= K, points on a
/// circle in the first two coordinates when 2 <= d < K, evenly spaced points
/// on [-1, 1] when d == 1.
Matrix blob_centers(std::size_t num_classes, std::size_t dim);

/// Isotropic Gaussian blobs around blob_centers with standard deviation
/// `spread`, generated class by class with exactly counts[k] rows for class k.
Dataset gen_blobs(Rng& rng, std::size_t num_classes, std::size_t dim, const ClassCounts& counts,
                  double spread);

/// Keeps a seeded random selection of counts[k] samples per class, where
/// counts = longtail_counts(spec). Rows keep their source order.
Dataset subsample_longtail(Rng& rng, const Dataset& src, const LongTailSpec& spec);

/// Per class, round_half_up(val_frac * N_k) samples go to validation (at
/// least 1 and at most N_k - 1 when N_k >= 2). Singleton classes stay in
/// train and leave a warning.
SplitPair stratified_split(Rng& rng, const Dataset& src, double val_frac);

/// Number of validation samples stratified_split assigns to a class of size n.
std::size_t validation_share(std::size_t n, double val_frac);

// ---- CIFAR-10 binary format ----------------------------------------------
//
// Each record is 3073 bytes: one label byte (0-9) followed by 3072 pixel
// bytes laid out as three 32x32 planes (R, then G, then B), row-major.

inline constexpr std::size_t kCifarPixels = 3072;
inline constexpr std::size_t kCifarRecordBytes = kCifarPixels + 1;
inline constexpr std::size_t kCifarClasses = 10;

struct CifarRecord {
  std::uint8_t label = 0;
  std::array<std::uint8_t, kCifarPixels> pixels{};
};

enum class CifarPart { kTrain, kTest };

std::vector<CifarRecord> parse_cifar10_records(std::span<const std::uint8_t> bytes,
                                               const std::string& source = "buffer");
std::vector<std::uint8_t> serialize_cifar10_records(std::span<const CifarRecord> records);
std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path);

/// File names of the standard binary batches for one part of the dataset.
std::vector<std::string> cifar10_batch_files(CifarPart part);

/// Records -> Dataset with d = 3072 and pixels scaled to [0, 1].
Dataset cifar_records_to_dataset(std::span<const CifarRecord> records);

/// Loads data_batch_1..5.bin (train) or test_batch.bin (test) from `dir`.
/// Pixels are scaled to [0, 1]; channel normalization is a separate step so
/// the constants can come from whichever split the caller chooses.
Dataset load_cifar10(const std::filesystem::path& dir, CifarPart part = CifarPart::kTrain);

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> std{};
};

/// Per-channel mean/std over a planar RGB dataset (d = 3072).
ChannelStats compute_channel_stats(const Dataset& data);
void normalize_channels(Dataset& data, const ChannelStats& stats);

/// `label,f0,f1,...` with a header row.
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace floodlab
