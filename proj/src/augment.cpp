#include "uada/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "uada/errors.hpp"

namespace uada {

namespace {

constexpr std::array<OpKind, kNumOpKinds> kAllKinds = {
    OpKind::Rotate,     OpKind::TranslateX, OpKind::TranslateY, OpKind::ShearX,
    OpKind::ShearY,     OpKind::Brightness, OpKind::Contrast,   OpKind::Solarize,
    OpKind::Posterize,  OpKind::Cutout,
};

constexpr std::array<std::string_view, kNumOpKinds> kKindNames = {
    "Rotate", "TranslateX", "TranslateY", "ShearX",    "ShearY",
    "Brightness", "Contrast", "Solarize", "Posterize", "Cutout",
};

constexpr int kMaxLevel = kMagnitudeLevels - 1;

bool has_direction(OpKind kind) {
  switch (kind) {
    case OpKind::Solarize:
    case OpKind::Posterize:
    case OpKind::Cutout:
      return false;
    default:
      return true;
  }
}

ParamSpec magnitude_spec(std::optional<int> identity) {
  return ParamSpec{"magnitude", 0, kMaxLevel, identity, true};
}

ParamSpec direction_spec() { return ParamSpec{"direction", 0, 1, std::nullopt, false}; }

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

double direction_sign(const OpInstance& op) { return op.levels.at(1) == 0 ? -1.0 : 1.0; }

/// Nearest-neighbour resampling with zero padding. source_of maps an output pixel
/// (x, y) to the continuous source coordinate it samples from.
template <typename SourceFn>
ImageBatch resample(const ImageBatch& in, SourceFn source_of) {
  ImageBatch out = in;
  const int n = in.size();
  const int c = in.channels;
  const int h = in.height;
  const int w = in.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  std::vector<std::ptrdiff_t> index(plane);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      const int ix = round_half_up(sx);
      const int iy = round_half_up(sy);
      const bool inside = ix >= 0 && ix < w && iy >= 0 && iy < h;
      index[static_cast<std::size_t>(y) * w + x] =
          inside ? static_cast<std::ptrdiff_t>(iy) * w + ix : -1;
    }
  }

  const int planes = n * c;
#pragma omp parallel for schedule(static)
  for (int pi = 0; pi < planes; ++pi) {
    const float* src = in.data.data() + static_cast<std::size_t>(pi) * plane;
    float* dst = out.data.data() + static_cast<std::size_t>(pi) * plane;
    for (std::size_t k = 0; k < plane; ++k) {
      dst[k] = index[k] < 0 ? 0.0f : clamp01(src[index[k]]);
    }
  }
  return out;
}

template <typename PixelFn>
ImageBatch map_pixels(const ImageBatch& in, PixelFn fn) {
  ImageBatch out = in;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(in.data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    out.data[static_cast<std::size_t>(i)] = clamp01(fn(in.data[static_cast<std::size_t>(i)]));
  }
  return out;
}

ImageBatch apply_contrast(const ImageBatch& in, double factor) {
  ImageBatch out = in;
  const int n = in.size();
  const std::size_t stride = in.sample_stride();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const float* src = in.data.data() + static_cast<std::size_t>(i) * stride;
    float* dst = out.data.data() + static_cast<std::size_t>(i) * stride;
    double sum = 0.0;
    for (std::size_t k = 0; k < stride; ++k) sum += src[k];
    const double mean = sum / static_cast<double>(stride);
    for (std::size_t k = 0; k < stride; ++k) {
      dst[k] = clamp01(static_cast<float>(mean + (src[k] - mean) * factor));
    }
  }
  return out;
}

ImageBatch apply_cutout(const ImageBatch& in, int side, int center_x, int center_y) {
  ImageBatch out = in;
  const int x0 = std::max(0, center_x - side / 2);
  const int y0 = std::max(0, center_y - side / 2);
  const int x1 = std::min(in.width, center_x - side / 2 + side);
  const int y1 = std::min(in.height, center_y - side / 2 + side);
  if (x0 >= x1 || y0 >= y1) return out;
  const int planes = in.size() * in.channels;
  const std::size_t plane = static_cast<std::size_t>(in.height) * in.width;
#pragma omp parallel for schedule(static)
  for (int pi = 0; pi < planes; ++pi) {
    float* dst = out.data.data() + static_cast<std::size_t>(pi) * plane;
    for (int y = y0; y < y1; ++y) {
      std::fill(dst + static_cast<std::size_t>(y) * in.width + x0,
                dst + static_cast<std::size_t>(y) * in.width + x1, 0.0f);
    }
  }
  return out;
}

}  // namespace

void ImageBatch::validate(int num_classes) const {
  if (labels.empty()) throw DomainError("image batch is empty");
  if (channels < 1 || height < 1 || width < 1) throw DomainError("image batch has a zero dimension");
  if (data.size() != labels.size() * sample_stride()) {
    throw DomainError("image batch data size does not match its shape");
  }
  for (float p : data) {
    if (!(p >= 0.0f && p <= 1.0f)) throw DomainError("pixel value outside [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw DomainError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

std::span<const OpKind> all_op_kinds() { return kAllKinds; }

std::string_view to_string(OpKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

OpKind parse_op_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return kAllKinds[i];
  }
  throw ConfigError("unknown augmentation op '" + std::string(name) + "'");
}

std::vector<ParamSpec> param_specs(OpKind kind, ImageGeometry geometry) {
  switch (kind) {
    case OpKind::Solarize:
      // Level 0 still inverts pixels equal to 1.0, so there is no identity level.
      return {magnitude_spec(std::nullopt)};
    case OpKind::Posterize:
      return {magnitude_spec(0)};
    case OpKind::Cutout:
      return {ParamSpec{"size", 0, kMaxLevel, 0, true},
              ParamSpec{"center_x", 0, geometry.width - 1, std::nullopt, true},
              ParamSpec{"center_y", 0, geometry.height - 1, std::nullopt, true}};
    default:
      return {magnitude_spec(0), direction_spec()};
  }
}

double level_to_physical(OpKind kind, int param_index, int level, ImageGeometry geometry) {
  const auto specs = param_specs(kind, geometry);
  if (param_index < 0 || param_index >= static_cast<int>(specs.size())) {
    throw DomainError(std::string(to_string(kind)) + " has no parameter " +
                      std::to_string(param_index));
  }
  const ParamSpec& spec = specs[static_cast<std::size_t>(param_index)];
  if (!spec.contains(level)) {
    throw DomainError(std::string(to_string(kind)) + "." + spec.name + " level " +
                      std::to_string(level) + " outside [" + std::to_string(spec.min_level) +
                      ", " + std::to_string(spec.max_level) + "]");
  }
  if (param_index == 1 && has_direction(kind)) return level == 0 ? -1.0 : 1.0;

  const double l = level;
  switch (kind) {
    case OpKind::Rotate:
      return l * (30.0 / 9.0);
    case OpKind::TranslateX:
      return round_half_up(l * (0.3 * geometry.width) / 9.0);
    case OpKind::TranslateY:
      return round_half_up(l * (0.3 * geometry.height) / 9.0);
    case OpKind::ShearX:
    case OpKind::ShearY:
      return l * (0.3 / 9.0);
    case OpKind::Brightness:
    case OpKind::Contrast:
      return 1.0 + l * (0.9 / 9.0);
    case OpKind::Solarize:
      return 1.0 - l * (1.0 / 9.0);
    case OpKind::Posterize:
      return 8.0 - std::floor(l * (4.0 / 9.0));
    case OpKind::Cutout:
      if (param_index == 0) {
        return round_half_up(l * (0.5 * std::min(geometry.height, geometry.width)) / 9.0);
      }
      return l;
  }
  throw InternalError("unhandled op kind");
}

OpRegistry OpRegistry::full(ImageGeometry geometry) {
  return OpRegistry{std::vector<OpKind>(kAllKinds.begin(), kAllKinds.end()), geometry};
}

Pipeline sample_pipeline(RngStream& rng, const OpRegistry& registry, int n_ops) {
  if (registry.kinds.empty()) throw ConfigError("augmentation registry is empty");
  if (n_ops < 1) throw ConfigError("n_ops must be >= 1");

  const int k = static_cast<int>(registry.kinds.size());
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);

  Pipeline p;
  p.geometry = registry.geometry;
  p.ops.reserve(static_cast<std::size_t>(n_ops));
  for (int i = 0; i < n_ops; ++i) {
    int pick;
    if (n_ops <= k) {
      // Partial Fisher-Yates: position i receives a uniform pick from the remaining kinds.
      const auto j = static_cast<int>(rng.uniform_int(i, k - 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      pick = order[static_cast<std::size_t>(i)];
    } else {
      pick = static_cast<int>(rng.uniform_int(0, k - 1));
    }
    OpInstance op;
    op.kind = registry.kinds[static_cast<std::size_t>(pick)];
    for (const ParamSpec& spec : param_specs(op.kind, registry.geometry)) {
      op.levels.push_back(static_cast<int>(rng.uniform_int(spec.min_level, spec.max_level)));
    }
    p.ops.push_back(std::move(op));
  }
  return p;
}

void validate_op(const OpInstance& op, ImageGeometry geometry) {
  const auto specs = param_specs(op.kind, geometry);
  if (op.levels.size() != specs.size()) {
    throw DomainError(std::string(to_string(op.kind)) + " expects " +
                      std::to_string(specs.size()) + " levels, got " +
                      std::to_string(op.levels.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].contains(op.levels[i])) {
      throw DomainError(std::string(to_string(op.kind)) + "." + specs[i].name + " level " +
                        std::to_string(op.levels[i]) + " out of range");
    }
  }
}

void validate_pipeline(const Pipeline& p) {
  if (p.ops.empty()) throw DomainError("pipeline has no operations");
  for (const OpInstance& op : p.ops) validate_op(op, p.geometry);
}

bool is_identity(const OpInstance& op) {
  switch (op.kind) {
    case OpKind::Solarize:
      return false;
    case OpKind::Posterize:
      return op.levels.at(0) == 0 || level_to_physical(op.kind, 0, op.levels[0], {1, 1}) >= 8.0;
    default:
      return op.levels.at(0) == 0;
  }
}

ImageBatch apply_op(const OpInstance& op, const ImageBatch& batch) {
  const ImageGeometry geometry = batch.geometry();
  validate_op(op, geometry);
  if (is_identity(op)) return batch;

  const double magnitude = level_to_physical(op.kind, 0, op.levels[0], geometry);
  const double cx = (batch.width - 1) / 2.0;
  const double cy = (batch.height - 1) / 2.0;

  switch (op.kind) {
    case OpKind::Rotate: {
      const double theta = direction_sign(op) * magnitude * std::numbers::pi / 180.0;
      const double cs = std::cos(theta);
      const double sn = std::sin(theta);
      return resample(batch, [&](double x, double y) {
        const double dx = x - cx;
        const double dy = y - cy;
        return std::pair{cs * dx + sn * dy + cx, -sn * dx + cs * dy + cy};
      });
    }
    case OpKind::TranslateX: {
      const double shift = direction_sign(op) * magnitude;
      return resample(batch, [&](double x, double y) { return std::pair{x - shift, y}; });
    }
    case OpKind::TranslateY: {
      const double shift = direction_sign(op) * magnitude;
      return resample(batch, [&](double x, double y) { return std::pair{x, y - shift}; });
    }
    case OpKind::ShearX: {
      const double s = direction_sign(op) * magnitude;
      return resample(batch, [&](double x, double y) { return std::pair{x - s * (y - cy), y}; });
    }
    case OpKind::ShearY: {
      const double s = direction_sign(op) * magnitude;
      return resample(batch, [&](double x, double y) { return std::pair{x, y - s * (x - cx)}; });
    }
    case OpKind::Brightness: {
      const auto factor = static_cast<float>(
          direction_sign(op) > 0 ? magnitude : 2.0 - magnitude);
      return map_pixels(batch, [factor](float p) { return p * factor; });
    }
    case OpKind::Contrast: {
      const double factor = direction_sign(op) > 0 ? magnitude : 2.0 - magnitude;
      return apply_contrast(batch, factor);
    }
    case OpKind::Solarize: {
      const auto threshold = static_cast<float>(magnitude);
      return map_pixels(batch, [threshold](float p) { return p >= threshold ? 1.0f - p : p; });
    }
    case OpKind::Posterize: {
      const int bits = static_cast<int>(magnitude);
      const unsigned mask = (0xFFu << (8 - bits)) & 0xFFu;
      return map_pixels(batch, [mask](float p) {
        const int q = std::clamp(round_half_up(static_cast<double>(p) * 255.0), 0, 255);
        return static_cast<float>(static_cast<unsigned>(q) & mask) / 255.0f;
      });
    }
    case OpKind::Cutout: {
      const int side = static_cast<int>(magnitude);
      return apply_cutout(batch, side, op.levels[1], op.levels[2]);
    }
  }
  throw InternalError("unhandled op kind");
}

ImageBatch apply_pipeline(const Pipeline& p, const ImageBatch& batch) {
  validate_pipeline(p);
  if (p.geometry != batch.geometry()) {
    throw DomainError("pipeline geometry does not match batch geometry");
  }
  ImageBatch current = batch;
  for (const OpInstance& op : p.ops) current = apply_op(op, current);
  return current;
}

std::vector<ParamLocator> adaptable_params(const Pipeline& p) {
  std::vector<ParamLocator> out;
  for (std::size_t i = 0; i < p.ops.size(); ++i) {
    const auto specs = param_specs(p.ops[i].kind, p.geometry);
    for (std::size_t j = 0; j < specs.size(); ++j) {
      if (specs[j].adaptable) out.push_back({static_cast<int>(i), static_cast<int>(j)});
    }
  }
  return out;
}

ParamSpec spec_at(const Pipeline& p, ParamLocator loc) {
  return param_specs(p.ops.at(static_cast<std::size_t>(loc.op_index)).kind, p.geometry)
      .at(static_cast<std::size_t>(loc.param_index));
}

int level_at(const Pipeline& p, ParamLocator loc) {
  return p.ops.at(static_cast<std::size_t>(loc.op_index))
      .levels.at(static_cast<std::size_t>(loc.param_index));
}

Pipeline with_level(Pipeline p, ParamLocator loc, int level) {
  p.ops.at(static_cast<std::size_t>(loc.op_index)).levels.at(static_cast<std::size_t>(loc.param_index)) =
      level;
  return p;
}

std::string describe(const Pipeline& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.ops.size(); ++i) {
    if (i) os << ' ';
    os << to_string(p.ops[i].kind) << '[';
    for (std::size_t j = 0; j < p.ops[i].levels.size(); ++j) {
      if (j) os << ',';
      os << p.ops[i].levels[j];
    }
    os << ']';
  }
  return os.str();
}

}  // namespace uada
