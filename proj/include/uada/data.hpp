#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uada/augment.hpp"

namespace uada {

enum class DataSource { Synthetic, IdxFiles, CifarBinary };

/// Per-sample variation of the synthetic bar renderer. All zeros renders the canonical bar.
struct SyntheticJitter {
  double orientation_deg = 10.0;
  double position_px = 2.0;
  double thickness_min = 1.5;
  double thickness_max = 3.0;
  double brightness_min = 0.6;
  double brightness_max = 1.0;
  double noise_sigma = 0.05;

  static SyntheticJitter none() { return {0.0, 0.0, 2.0, 2.0, 1.0, 1.0, 0.0}; }
};

struct DatasetSpec {
  DataSource source = DataSource::Synthetic;
  int num_classes = 3;
  int channels = 1;
  int height = 16;
  int width = 16;
  int train_count = 2000;
  int test_count = 500;
  std::uint64_t seed = 7;
  SyntheticJitter jitter;
  // IDX sources
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  // CIFAR-10 binary batches
  std::vector<std::filesystem::path> cifar_train, cifar_test;

  void validate() const;
};

struct Dataset {
  int num_classes = 0;
  ImageBatch images;  // all samples as one batch

  int size() const { return images.size(); }
  /// FNV-1a over the shape, pixel bytes and labels.
  std::uint64_t checksum() const;
  /// Gathers the given sample indices into a new batch.
  ImageBatch gather(std::span<const int> indices) const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Anti-aliased bars, class k at orientation 180k/C degrees. Labels cycle 0..C-1 so class
/// counts differ by at most one. Deterministic in (spec.seed, split).
Dataset gen_synthetic(const DatasetSpec& spec, int count, std::uint64_t split);
DatasetPair gen_synthetic(const DatasetSpec& spec);

/// Big-endian IDX (magic 0x00000803 images, 0x00000801 labels). Throws FormatError naming
/// the file and byte offset on bad magic or truncation.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes);
/// Writes pixels rounded to bytes; exact for images whose pixels are multiples of 1/255.
void write_idx(const Dataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels);

/// CIFAR-10 binary batches: 3073-byte records (label, then 3x32x32 channel-planar bytes).
Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, int num_classes = 10);

/// Loads or generates train/test splits as described by the spec.
DatasetPair load_dataset(const DatasetSpec& spec);

/// Index lists for one epoch: a permutation derived from (shuffle_seed, epoch), chunked
/// into batches of batch_size with the final short batch kept.
std::vector<std::vector<int>> batches(int dataset_size, int batch_size,
                                      std::uint64_t shuffle_seed, std::uint64_t epoch);

/// Rounds every pixel to the nearest multiple of 1/255 (the byte lattice used on disk).
void quantize_to_bytes(Dataset& d);

}  // namespace uada
