#include "uada/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "uada/errors.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) {
    throw FormatError(path.string() + ": truncated header at offset " + std::to_string(offset) +
                      " (expected " + std::to_string(offset + 4) + " bytes, got " +
                      std::to_string(buf.size()) + ")");
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                 static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

float byte_to_pixel(unsigned char b) { return static_cast<float>(b) / 255.0f; }

unsigned char pixel_to_byte(float p) {
  return static_cast<unsigned char>(
      std::clamp(static_cast<int>(std::floor(static_cast<double>(p) * 255.0 + 0.5)), 0, 255));
}

void check_label(int label, int num_classes, const std::filesystem::path& path,
                 std::size_t offset) {
  if (label >= num_classes) {
    throw FormatError(path.string() + ": label " + std::to_string(label) + " at offset " +
                      std::to_string(offset) + " is outside [0, " + std::to_string(num_classes) +
                      ")");
  }
}

}  // namespace

void DatasetSpec::validate() const {
  if (num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
  if (source == DataSource::Synthetic) {
    if (train_count < 1 || test_count < 1) throw ConfigError("data counts must be >= 1");
    if (height < 8 || width < 8) throw ConfigError("data image size must be at least 8x8");
    if (channels < 1) throw ConfigError("data.channels must be >= 1");
    if (!(jitter.thickness_min > 0.0 && jitter.thickness_min <= jitter.thickness_max)) {
      throw ConfigError("data.jitter.thickness_min must be > 0 and <= thickness_max");
    }
    if (!(jitter.brightness_min >= 0.0 && jitter.brightness_min <= jitter.brightness_max &&
          jitter.brightness_max <= 1.0)) {
      throw ConfigError("data.jitter brightness range must satisfy 0 <= min <= max <= 1");
    }
  }
  if (source == DataSource::IdxFiles &&
      (train_images.empty() || train_labels.empty() || test_images.empty() ||
       test_labels.empty())) {
    throw ConfigError("idx source needs data.train_images/train_labels/test_images/test_labels");
  }
  if (source == DataSource::CifarBinary && (cifar_train.empty() || cifar_test.empty())) {
    throw ConfigError("cifar source needs data.cifar_train and data.cifar_test");
  }
}

std::uint64_t Dataset::checksum() const {
  const std::array<std::int32_t, 4> shape = {images.size(), images.channels, images.height,
                                             images.width};
  std::uint64_t h = fnv1a(shape.data(), sizeof(shape));
  h = fnv1a(images.data.data(), images.data.size() * sizeof(float), h);
  return fnv1a(images.labels.data(), images.labels.size() * sizeof(int), h);
}

ImageBatch Dataset::gather(std::span<const int> indices) const {
  ImageBatch out(static_cast<int>(indices.size()), images.channels, images.height, images.width);
  const std::size_t stride = images.sample_stride();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = images.sample(indices[k]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(k * stride));
    out.labels[k] = images.labels[static_cast<std::size_t>(indices[k])];
  }
  return out;
}

Dataset gen_synthetic(const DatasetSpec& spec, int count, std::uint64_t split) {
  Dataset d;
  d.num_classes = spec.num_classes;
  d.images = ImageBatch(count, spec.channels, spec.height, spec.width);
  const SyntheticJitter& j = spec.jitter;
  const double cx0 = (spec.width - 1) / 2.0;
  const double cy0 = (spec.height - 1) / 2.0;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    RngStream rng = substream(spec.seed, "synthetic",
                              {split, static_cast<std::uint64_t>(i)});
    const int label = i % spec.num_classes;
    const double base = 180.0 * label / spec.num_classes;
    const double theta =
        (base + rng.uniform(-j.orientation_deg, j.orientation_deg)) * std::numbers::pi / 180.0;
    const double cx = cx0 + rng.uniform(-j.position_px, j.position_px);
    const double cy = cy0 + rng.uniform(-j.position_px, j.position_px);
    const double thickness = rng.uniform(j.thickness_min, j.thickness_max);
    const double brightness = rng.uniform(j.brightness_min, j.brightness_max);
    const double sn = std::sin(theta);
    const double cs = std::cos(theta);

    auto px = d.images.sample(i);
    const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        // Distance to the bar's centre line; coverage gives a one-pixel anti-aliased edge.
        const double dist = std::abs(-sn * (x - cx) + cs * (y - cy));
        const double coverage = std::clamp(thickness / 2.0 + 0.5 - dist, 0.0, 1.0);
        double v = brightness * coverage;
        if (j.noise_sigma > 0.0) v += j.noise_sigma * rng.normal();
        const float p = byte_to_pixel(pixel_to_byte(static_cast<float>(std::clamp(v, 0.0, 1.0))));
        for (int c = 0; c < spec.channels; ++c) {
          px[c * plane + static_cast<std::size_t>(y) * spec.width + x] = p;
        }
      }
    }
    d.images.labels[static_cast<std::size_t>(i)] = label;
  }
  return d;
}

DatasetPair gen_synthetic(const DatasetSpec& spec) {
  return {gen_synthetic(spec, spec.train_count, 0), gen_synthetic(spec, spec.test_count, 1)};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes) {
  const auto ib = read_bytes(images);
  const auto lb = read_bytes(labels);

  const std::uint32_t im = read_be32(ib, 0, images);
  if (im != kIdxImagesMagic) {
    throw FormatError(images.string() + ": bad IDX image magic at offset 0");
  }
  const std::uint32_t n = read_be32(ib, 4, images);
  const std::uint32_t rows = read_be32(ib, 8, images);
  const std::uint32_t cols = read_be32(ib, 12, images);
  const std::size_t expected = 16 + static_cast<std::size_t>(n) * rows * cols;
  if (ib.size() < expected) {
    throw FormatError(images.string() + ": truncated payload at offset " +
                      std::to_string(ib.size()) + " (expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(ib.size()) + ")");
  }

  if (read_be32(lb, 0, labels) != kIdxLabelsMagic) {
    throw FormatError(labels.string() + ": bad IDX label magic at offset 0");
  }
  const std::uint32_t nl = read_be32(lb, 4, labels);
  if (nl != n) {
    throw FormatError(labels.string() + ": label count " + std::to_string(nl) +
                      " at offset 4 does not match image count " + std::to_string(n));
  }
  if (lb.size() < 8 + static_cast<std::size_t>(n)) {
    throw FormatError(labels.string() + ": truncated payload at offset " +
                      std::to_string(lb.size()) + " (expected " + std::to_string(8 + n) +
                      " bytes, got " + std::to_string(lb.size()) + ")");
  }

  Dataset d;
  d.num_classes = num_classes;
  d.images = ImageBatch(static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols));
  for (std::size_t k = 0; k < d.images.data.size(); ++k) d.images.data[k] = byte_to_pixel(ib[16 + k]);
  for (std::size_t i = 0; i < n; ++i) {
    check_label(lb[8 + i], num_classes, labels, 8 + i);
    d.images.labels[i] = lb[8 + i];
  }
  return d;
}

void write_idx(const Dataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  if (d.images.channels != 1) throw FormatError("IDX output supports single-channel images only");
  {
    std::ofstream out(images, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + images.string());
    write_be32(out, kIdxImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(d.size()));
    write_be32(out, static_cast<std::uint32_t>(d.images.height));
    write_be32(out, static_cast<std::uint32_t>(d.images.width));
    std::vector<char> bytes(d.images.data.size());
    for (std::size_t k = 0; k < bytes.size(); ++k) {
      bytes[k] = static_cast<char>(pixel_to_byte(d.images.data[k]));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + images.string());
  }
  std::ofstream out(labels, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + labels.string());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(d.size()));
  for (int y : d.images.labels) out.put(static_cast<char>(y));
  if (!out) throw FormatError("failed writing " + labels.string());
}

Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, int num_classes) {
  std::vector<std::vector<unsigned char>> files;
  std::size_t records = 0;
  for (const auto& path : paths) {
    files.push_back(read_bytes(path));
    if (files.back().size() % kCifarRecord != 0) {
      throw FormatError(path.string() + ": length " + std::to_string(files.back().size()) +
                        " is not a multiple of " + std::to_string(kCifarRecord) +
                        " (truncated record at offset " +
                        std::to_string(files.back().size() / kCifarRecord * kCifarRecord) + ")");
    }
    records += files.back().size() / kCifarRecord;
  }
  Dataset d;
  d.num_classes = num_classes;
  d.images = ImageBatch(static_cast<int>(records), 3, 32, 32);
  std::size_t r = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& buf = files[f];
    for (std::size_t off = 0; off < buf.size(); off += kCifarRecord, ++r) {
      check_label(buf[off], num_classes, paths[f], off);
      d.images.labels[r] = buf[off];
      auto px = d.images.sample(static_cast<int>(r));
      for (std::size_t k = 0; k < kCifarRecord - 1; ++k) px[k] = byte_to_pixel(buf[off + 1 + k]);
    }
  }
  return d;
}

DatasetPair load_dataset(const DatasetSpec& spec) {
  spec.validate();
  switch (spec.source) {
    case DataSource::Synthetic:
      return gen_synthetic(spec);
    case DataSource::IdxFiles:
      return {load_idx(spec.train_images, spec.train_labels, spec.num_classes),
              load_idx(spec.test_images, spec.test_labels, spec.num_classes)};
    case DataSource::CifarBinary:
      return {load_cifar_binary(spec.cifar_train, spec.num_classes),
              load_cifar_binary(spec.cifar_test, spec.num_classes)};
  }
  throw InternalError("unhandled data source");
}

std::vector<std::vector<int>> batches(int dataset_size, int batch_size,
                                      std::uint64_t shuffle_seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(dataset_size));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = substream(shuffle_seed, "shuffle", {epoch});
  for (int i = dataset_size - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  std::vector<std::vector<int>> out;
  for (int start = 0; start < dataset_size; start += batch_size) {
    const int end = std::min(dataset_size, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

void quantize_to_bytes(Dataset& d) {
  for (float& p : d.images.data) p = byte_to_pixel(pixel_to_byte(p));
}

}  // namespace uada
