#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uada/rng.hpp"

namespace uada {

struct ImageGeometry {
  int height = 0;
  int width = 0;
  friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

/// A batch of images in NCHW order with pixel values in [0, 1].
struct ImageBatch {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
  std::vector<int> labels;

  ImageBatch() = default;
  ImageBatch(int n, int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(n) * c * h * w, 0.0f),
        labels(static_cast<std::size_t>(n), 0) {}

  int size() const { return static_cast<int>(labels.size()); }
  std::size_t sample_stride() const { return static_cast<std::size_t>(channels) * height * width; }
  ImageGeometry geometry() const { return {height, width}; }

  std::span<float> sample(int i) { return {data.data() + i * sample_stride(), sample_stride()}; }
  std::span<const float> sample(int i) const {
    return {data.data() + i * sample_stride(), sample_stride()};
  }

  /// Throws DomainError if shape, pixel range or labels are inconsistent.
  void validate(int num_classes) const;

  friend bool operator==(const ImageBatch&, const ImageBatch&) = default;
};

enum class OpKind {
  Rotate,
  TranslateX,
  TranslateY,
  ShearX,
  ShearY,
  Brightness,
  Contrast,
  Solarize,
  Posterize,
  Cutout,
};

inline constexpr int kNumOpKinds = 10;
inline constexpr int kMagnitudeLevels = 10;

std::span<const OpKind> all_op_kinds();
std::string_view to_string(OpKind kind);
/// Parses a kind name (case-sensitive, as printed by to_string). Throws ConfigError.
OpKind parse_op_kind(std::string_view name);

/// One integer lattice parameter of an operation.
struct ParamSpec {
  std::string name;
  int min_level = 0;
  int max_level = 0;
  std::optional<int> identity_level;
  bool adaptable = false;

  int num_levels() const { return max_level - min_level + 1; }
  bool contains(int level) const { return level >= min_level && level <= max_level; }
};

/// Parameter layout per kind:
///   Rotate, Translate*, Shear*, Brightness, Contrast: [magnitude 0..9, direction 0..1]
///   Solarize, Posterize: [magnitude 0..9]
///   Cutout: [size 0..9, center_x 0..W-1, center_y 0..H-1]
/// Direction levels are frozen after sampling (0 -> negative, 1 -> positive).
std::vector<ParamSpec> param_specs(OpKind kind, ImageGeometry geometry);

/// Maps a lattice level to its physical value (degrees, pixels, factor, threshold,
/// bits, side length, coordinate, or +-1 for direction). Throws DomainError when the
/// level is outside the spec bounds.
double level_to_physical(OpKind kind, int param_index, int level, ImageGeometry geometry);

struct OpInstance {
  OpKind kind = OpKind::Rotate;
  std::vector<int> levels;

  friend bool operator==(const OpInstance&, const OpInstance&) = default;
};

/// Ordered composition; ops[0] is applied first (innermost).
struct Pipeline {
  ImageGeometry geometry;
  std::vector<OpInstance> ops;

  friend bool operator==(const Pipeline&, const Pipeline&) = default;
};

struct ParamLocator {
  int op_index = 0;
  int param_index = 0;

  friend auto operator<=>(const ParamLocator&, const ParamLocator&) = default;
};

struct OpRegistry {
  std::vector<OpKind> kinds;
  ImageGeometry geometry;

  /// All ten kinds for the given geometry.
  static OpRegistry full(ImageGeometry geometry);
};

/// Draws n_ops kinds uniformly (without replacement when n_ops <= |kinds|) and
/// every level uniformly from its range. Throws ConfigError on an empty registry
/// or n_ops < 1.
Pipeline sample_pipeline(RngStream& rng, const OpRegistry& registry, int n_ops);

/// Throws DomainError when any level of op is out of range for the geometry.
void validate_op(const OpInstance& op, ImageGeometry geometry);
void validate_pipeline(const Pipeline& p);

/// True when op is the exact identity map (an identity-capable kind at its identity level).
bool is_identity(const OpInstance& op);

ImageBatch apply_op(const OpInstance& op, const ImageBatch& batch);
ImageBatch apply_pipeline(const Pipeline& p, const ImageBatch& batch);

/// Every adaptable (op_index, param_index), in lexicographic order.
std::vector<ParamLocator> adaptable_params(const Pipeline& p);

ParamSpec spec_at(const Pipeline& p, ParamLocator loc);
int level_at(const Pipeline& p, ParamLocator loc);
Pipeline with_level(Pipeline p, ParamLocator loc, int level);

/// Human-readable one-line form, e.g. "Rotate[7,1] Cutout[3,5,9]".
std::string describe(const Pipeline& p);

}  // namespace uada
