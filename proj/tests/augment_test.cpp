#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <set>

#include "test_support.hpp"
#include "uada/augment.hpp"
#include "uada/errors.hpp"

namespace uada {
namespace {

constexpr ImageGeometry kGeo16{16, 16};
constexpr ImageGeometry kGeo32{32, 32};

OpInstance op(OpKind kind, std::vector<int> levels) { return {kind, std::move(levels)}; }

/// Every valid level assignment with magnitude levels swept and other parameters fixed to a
/// representative value.
std::vector<OpInstance> representative_ops(ImageGeometry g) {
  std::vector<OpInstance> out;
  for (OpKind kind : all_op_kinds()) {
    const auto specs = param_specs(kind, g);
    for (int level = specs[0].min_level; level <= specs[0].max_level; ++level) {
      if (kind == OpKind::Cutout) {
        out.push_back(op(kind, {level, g.width / 3, g.height - 2}));
      } else if (specs.size() == 2) {
        out.push_back(op(kind, {level, 0}));
        out.push_back(op(kind, {level, 1}));
      } else {
        out.push_back(op(kind, {level}));
      }
    }
  }
  return out;
}

TEST(LevelToPhysical, RotateEndpoints) {
  EXPECT_EQ(level_to_physical(OpKind::Rotate, 0, 0, kGeo16), 0.0);
  EXPECT_DOUBLE_EQ(level_to_physical(OpKind::Rotate, 0, 9, kGeo16), 30.0);
}

TEST(LevelToPhysical, PosterizeIdentityKeepsEightBits) {
  EXPECT_EQ(level_to_physical(OpKind::Posterize, 0, 0, kGeo16), 8.0);
}

TEST(LevelToPhysical, FrozenTables) {
  const std::array<double, 10> translate16 = {0, 1, 1, 2, 2, 3, 3, 4, 4, 5};
  const std::array<double, 10> translate32 = {0, 1, 2, 3, 4, 5, 6, 7, 9, 10};
  const std::array<double, 10> cutout16 = {0, 1, 2, 3, 4, 4, 5, 6, 7, 8};
  const std::array<double, 10> posterize = {8, 8, 8, 7, 7, 6, 6, 5, 5, 4};
  for (int l = 0; l < 10; ++l) {
    const auto i = static_cast<std::size_t>(l);
    EXPECT_EQ(level_to_physical(OpKind::TranslateX, 0, l, kGeo16), translate16[i]) << l;
    EXPECT_EQ(level_to_physical(OpKind::TranslateY, 0, l, kGeo32), translate32[i]) << l;
    EXPECT_EQ(level_to_physical(OpKind::Cutout, 0, l, kGeo16), cutout16[i]) << l;
    EXPECT_EQ(level_to_physical(OpKind::Posterize, 0, l, kGeo16), posterize[i]) << l;
    EXPECT_DOUBLE_EQ(level_to_physical(OpKind::ShearX, 0, l, kGeo16), l * 0.3 / 9.0);
    EXPECT_DOUBLE_EQ(level_to_physical(OpKind::Brightness, 0, l, kGeo16), 1.0 + l * 0.1);
    EXPECT_DOUBLE_EQ(level_to_physical(OpKind::Solarize, 0, l, kGeo16), 1.0 - l / 9.0);
  }
}

TEST(LevelToPhysical, TranslateUsesAxisLength) {
  const ImageGeometry wide{8, 32};
  EXPECT_EQ(level_to_physical(OpKind::TranslateX, 0, 9, wide), 10.0);
  EXPECT_EQ(level_to_physical(OpKind::TranslateY, 0, 9, wide), 2.0);
}

TEST(LevelToPhysical, DirectionMapsToSign) {
  EXPECT_EQ(level_to_physical(OpKind::Brightness, 1, 0, kGeo16), -1.0);
  EXPECT_EQ(level_to_physical(OpKind::Brightness, 1, 1, kGeo16), 1.0);
}

TEST(LevelToPhysical, MonotoneInLevelForEveryMagnitudeSpec) {
  for (ImageGeometry g : {kGeo16, kGeo32, ImageGeometry{9, 23}}) {
    for (OpKind kind : all_op_kinds()) {
      double prev = level_to_physical(kind, 0, 0, g);
      for (int l = 1; l <= 9; ++l) {
        const double cur = level_to_physical(kind, 0, l, g);
        if (kind == OpKind::Solarize || kind == OpKind::Posterize) {
          EXPECT_LE(cur, prev) << to_string(kind);
        } else {
          EXPECT_GE(cur, prev) << to_string(kind);
        }
        prev = cur;
      }
    }
  }
}

TEST(LevelToPhysical, OutOfRangeLevelIsDomainError) {
  EXPECT_THROW(level_to_physical(OpKind::Rotate, 0, 10, kGeo16), DomainError);
  EXPECT_THROW(level_to_physical(OpKind::Rotate, 0, -1, kGeo16), DomainError);
  EXPECT_THROW(level_to_physical(OpKind::Cutout, 1, 16, kGeo16), DomainError);
  EXPECT_THROW(level_to_physical(OpKind::Solarize, 1, 0, kGeo16), DomainError);
}

TEST(ParamSpecs, LatticeInvariants) {
  for (OpKind kind : all_op_kinds()) {
    const auto specs = param_specs(kind, kGeo16);
    ASSERT_FALSE(specs.empty());
    EXPECT_EQ(specs[0].min_level, 0);
    EXPECT_EQ(specs[0].max_level, 9);
    for (const ParamSpec& s : specs) {
      EXPECT_LE(s.min_level, s.max_level);
      if (s.identity_level) {
        EXPECT_TRUE(s.contains(*s.identity_level));
        EXPECT_EQ(level_to_physical(kind, 0, *s.identity_level, kGeo16),
                  level_to_physical(kind, 0, 0, kGeo16));
      }
    }
  }
  const auto cutout = param_specs(OpKind::Cutout, ImageGeometry{12, 20});
  ASSERT_EQ(cutout.size(), 3u);
  EXPECT_EQ(cutout[1].max_level, 19);
  EXPECT_EQ(cutout[2].max_level, 11);
}

TEST(OpKindNames, RoundTrip) {
  for (OpKind kind : all_op_kinds()) EXPECT_EQ(parse_op_kind(to_string(kind)), kind);
  EXPECT_THROW(parse_op_kind("Equalize"), ConfigError);
}

TEST(ApplyOp, IdentityLevelIsBitIdentical) {
  const ImageBatch b = test::random_batch(4, 2, 16, 16, 11);
  for (OpKind kind : all_op_kinds()) {
    const auto specs = param_specs(kind, kGeo16);
    if (!specs[0].identity_level) continue;
    std::vector<int> levels(specs.size(), 0);
    levels[0] = *specs[0].identity_level;
    if (kind == OpKind::Cutout) levels = {0, 7, 3};
    for (int dir = 0; dir < (specs.size() == 2 ? 2 : 1); ++dir) {
      if (specs.size() == 2) levels[1] = dir;
      EXPECT_EQ(apply_op(op(kind, levels), b), b) << to_string(kind);
    }
  }
}

TEST(ApplyOp, PosterizeAtEightBitsIsIdentity) {
  const ImageBatch b = test::random_batch(2, 1, 16, 16, 3);
  for (int l : {0, 1, 2}) EXPECT_EQ(apply_op(op(OpKind::Posterize, {l}), b), b);
  EXPECT_NE(apply_op(op(OpKind::Posterize, {3}), b), b);
}

TEST(ApplyOp, CutoutSizeZeroIsIdentity) {
  const ImageBatch b = test::random_batch(3, 1, 16, 16, 5);
  for (int cx : {0, 8, 15}) {
    EXPECT_EQ(apply_op(op(OpKind::Cutout, {0, cx, 15 - cx}), b), b);
  }
}

TEST(ApplyOp, BrightnessClosedForm) {
  const ImageBatch half = test::constant_batch(2, 1, 16, 16, 0.5f);
  const ImageBatch up = apply_op(op(OpKind::Brightness, {9, 1}), half);
  const ImageBatch down = apply_op(op(OpKind::Brightness, {9, 0}), half);
  const double factor = 1.0 + 9 * (0.9 / 9.0);
  for (float p : up.data) EXPECT_EQ(p, 0.5f * static_cast<float>(factor));
  for (float p : down.data) EXPECT_EQ(p, 0.5f * static_cast<float>(2.0 - factor));
  EXPECT_FLOAT_EQ(up.data[0], 0.95f);
  EXPECT_FLOAT_EQ(down.data[0], 0.05f);
}

TEST(ApplyOp, SolarizeThresholds) {
  ImageBatch b(1, 1, 1, 4);
  b.data = {0.0f, 0.25f, 0.75f, 1.0f};
  EXPECT_EQ(apply_op(op(OpKind::Solarize, {9}), b).data,
            (std::vector<float>{1.0f, 0.75f, 0.25f, 0.0f}));
  EXPECT_EQ(apply_op(op(OpKind::Solarize, {0}), b).data,
            (std::vector<float>{0.0f, 0.25f, 0.75f, 0.0f}));
}

TEST(ApplyOp, PosterizeFourBits) {
  ImageBatch b(1, 1, 1, 3);
  b.data = {0.5f, 1.0f, 15.0f / 255.0f};
  const ImageBatch out = apply_op(op(OpKind::Posterize, {9}), b);
  EXPECT_EQ(out.data[0], 128.0f / 255.0f);
  EXPECT_EQ(out.data[1], 240.0f / 255.0f);
  EXPECT_EQ(out.data[2], 0.0f);
}

TEST(ApplyOp, ContrastKeepsConstantImage) {
  const ImageBatch b = test::constant_batch(2, 1, 8, 8, 0.4f);
  for (int dir : {0, 1}) {
    const ImageBatch out = apply_op(op(OpKind::Contrast, {9, dir}), b);
    for (float p : out.data) EXPECT_NEAR(p, 0.4f, 1e-7f);
  }
}

TEST(ApplyOp, TranslateXShiftsByTablePixels) {
  const ImageBatch b = test::random_batch(2, 2, 16, 16, 8);
  for (int dir : {0, 1}) {
    const ImageBatch out = apply_op(op(OpKind::TranslateX, {9, dir}), b);
    const int shift = dir == 1 ? 5 : -5;
    for (int i = 0; i < b.size(); ++i) {
      for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < 16; ++y) {
          for (int x = 0; x < 16; ++x) {
            const int sx = x - shift;
            const std::size_t base = (static_cast<std::size_t>(i) * 2 + c) * 256;
            const float expected = (sx >= 0 && sx < 16) ? b.data[base + y * 16 + sx] : 0.0f;
            ASSERT_EQ(out.data[base + y * 16 + x], expected);
          }
        }
      }
    }
  }
}

TEST(ApplyOp, TranslateYShiftsRows) {
  const ImageBatch b = test::random_batch(1, 1, 16, 16, 9);
  const ImageBatch out = apply_op(op(OpKind::TranslateY, {3, 1}), b);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const float expected = y >= 2 ? b.data[(y - 2) * 16 + x] : 0.0f;
      ASSERT_EQ(out.data[y * 16 + x], expected);
    }
  }
}

TEST(ApplyOp, CutoutZeroesSquarePatch) {
  const ImageBatch b = test::constant_batch(1, 1, 16, 16, 1.0f);
  // size level 5 on 16x16 -> side 4, patch x in [6, 10), y in [1, 5).
  const ImageBatch out = apply_op(op(OpKind::Cutout, {5, 8, 3}), b);
  int zeros = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool inside = x >= 6 && x < 10 && y >= 1 && y < 5;
      EXPECT_EQ(out.data[y * 16 + x], inside ? 0.0f : 1.0f);
      zeros += inside;
    }
  }
  EXPECT_EQ(zeros, 16);
}

TEST(ApplyOp, CutoutClipsAtBorder) {
  const ImageBatch b = test::constant_batch(1, 1, 16, 16, 1.0f);
  const ImageBatch out = apply_op(op(OpKind::Cutout, {9, 0, 15}), b);
  // Side 8 centred at (0, 15): columns [0, 4) and rows [11, 16) survive the clip.
  const auto zeros = std::count(out.data.begin(), out.data.end(), 0.0f);
  EXPECT_EQ(zeros, 4 * 5);
}

TEST(ApplyOp, RotateMovesBarTowardNextClass) {
  ImageBatch b(1, 1, 15, 15);
  for (int x = 0; x < 15; ++x) b.data[7 * 15 + x] = 1.0f;
  const ImageBatch out = apply_op(op(OpKind::Rotate, {9, 1}), b);
  EXPECT_EQ(out.data[7 * 15 + 7], 1.0f);
  // The bar through the center now runs at 30 degrees, so row 7 is mostly empty.
  int row_mass = 0;
  for (int x = 0; x < 15; ++x) row_mass += out.data[7 * 15 + x] > 0.0f;
  EXPECT_LT(row_mass, 5);
  int total = 0;
  for (float p : out.data) total += p > 0.0f;
  EXPECT_GE(total, 12);
}

TEST(ApplyOp, GeometryAndLevelErrors) {
  const ImageBatch b = test::random_batch(1, 1, 16, 16, 1);
  EXPECT_THROW(apply_op(op(OpKind::Rotate, {3}), b), DomainError);
  EXPECT_THROW(apply_op(op(OpKind::Rotate, {10, 0}), b), DomainError);
  EXPECT_THROW(apply_op(op(OpKind::Cutout, {1, 16, 0}), b), DomainError);
  Pipeline p{kGeo32, {op(OpKind::Rotate, {3, 1})}};
  EXPECT_THROW(apply_pipeline(p, b), DomainError);
  EXPECT_THROW(apply_pipeline(Pipeline{kGeo16, {}}, b), DomainError);
}

TEST(ApplyOpProperty, PureRangePreservingAndLabelInvariant) {
  for (ImageGeometry g : {kGeo16, ImageGeometry{9, 13}}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      ImageBatch b = test::random_batch(3, 2, g.height, g.width, 100 + seed);
      b.data[0] = 0.0f;
      b.data[1] = 1.0f;
      const ImageBatch copy = b;
      for (const OpInstance& o : representative_ops(g)) {
        const ImageBatch out = apply_op(o, b);
        ASSERT_EQ(b, copy) << "input mutated by " << to_string(o.kind);
        ASSERT_EQ(out.labels, b.labels);
        ASSERT_EQ(out.data.size(), b.data.size());
        for (float p : out.data) {
          ASSERT_GE(p, 0.0f) << to_string(o.kind);
          ASSERT_LE(p, 1.0f) << to_string(o.kind);
        }
        ASSERT_EQ(apply_op(o, b), out) << "not deterministic: " << to_string(o.kind);
      }
    }
  }
}

TEST(ApplyOpProperty, RandomPipelinesStayInRange) {
  const OpRegistry registry = OpRegistry::full(kGeo16);
  RngStream rng(2024);
  const ImageBatch b = test::random_batch(4, 1, 16, 16, 77);
  for (int trial = 0; trial < 300; ++trial) {
    const Pipeline p = sample_pipeline(rng, registry, 1 + trial % 4);
    const ImageBatch out = apply_pipeline(p, b);
    for (float v : out.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f) << describe(p);
    ASSERT_EQ(out.labels, b.labels);
  }
}

TEST(ApplyPipeline, EqualsNestedApplyOp) {
  const ImageBatch b = test::random_batch(2, 1, 16, 16, 21);
  const Pipeline p{kGeo16,
                   {op(OpKind::ShearX, {4, 0}), op(OpKind::Contrast, {6, 1}),
                    op(OpKind::Cutout, {3, 2, 9})}};
  const ImageBatch nested = apply_op(p.ops[2], apply_op(p.ops[1], apply_op(p.ops[0], b)));
  EXPECT_EQ(apply_pipeline(p, b), nested);
  const Pipeline reversed{kGeo16, {p.ops[2], p.ops[1], p.ops[0]}};
  EXPECT_NE(apply_pipeline(reversed, b), nested);
}

TEST(ApplyPipeline, AllIdentityOpsGiveBitIdenticalBatch) {
  const ImageBatch b = test::random_batch(2, 3, 16, 16, 4);
  const Pipeline p{kGeo16,
                   {op(OpKind::Rotate, {0, 1}), op(OpKind::TranslateY, {0, 0}),
                    op(OpKind::Posterize, {0}), op(OpKind::Cutout, {0, 4, 4})}};
  EXPECT_EQ(apply_pipeline(p, b), b);
}

TEST(ApplyPipeline, IdentityRotateAbsorbedByCutout) {
  const ImageBatch b = test::random_batch(2, 1, 16, 16, 6);
  const OpInstance cutout = op(OpKind::Cutout, {6, 10, 5});
  EXPECT_EQ(apply_pipeline(Pipeline{kGeo16, {op(OpKind::Rotate, {0, 0}), cutout}}, b),
            apply_op(cutout, b));
}

TEST(ApplyPipeline, TranslateRoundTripOnInteriorContent) {
  ImageBatch b(2, 1, 32, 32);
  RngStream rng(31);
  for (int i = 0; i < 2; ++i) {
    for (int y = 11; y < 21; ++y) {
      for (int x = 11; x < 21; ++x) {
        b.data[static_cast<std::size_t>(i) * 1024 + y * 32 + x] = static_cast<float>(rng.uniform01());
      }
    }
  }
  for (OpKind kind : {OpKind::TranslateX, OpKind::TranslateY}) {
    for (int level = 0; level <= 9; ++level) {
      const Pipeline p{kGeo32, {op(kind, {level, 1}), op(kind, {level, 0})}};
      EXPECT_EQ(apply_pipeline(p, b), b) << to_string(kind) << " level " << level;
    }
  }
}

TEST(SamplePipeline, SingleKindRegistry) {
  RngStream rng(5);
  const OpRegistry registry{{OpKind::Rotate}, kGeo16};
  for (int i = 0; i < 100; ++i) {
    const Pipeline p = sample_pipeline(rng, registry, 1);
    ASSERT_EQ(p.ops.size(), 1u);
    EXPECT_EQ(p.ops[0].kind, OpKind::Rotate);
    EXPECT_GE(p.ops[0].levels[0], 0);
    EXPECT_LE(p.ops[0].levels[0], 9);
    EXPECT_NO_THROW(validate_pipeline(p));
  }
}

TEST(SamplePipeline, SameSeedSamePipeline) {
  const OpRegistry registry = OpRegistry::full(kGeo16);
  RngStream a(99), b(99);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_pipeline(a, registry, 3), sample_pipeline(b, registry, 3));
}

TEST(SamplePipeline, WithoutReplacementWhenPossible) {
  const OpRegistry registry = OpRegistry::full(kGeo16);
  RngStream rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Pipeline p = sample_pipeline(rng, registry, 4);
    std::set<OpKind> kinds;
    for (const auto& o : p.ops) kinds.insert(o.kind);
    ASSERT_EQ(kinds.size(), 4u);
  }
  const OpRegistry two{{OpKind::Rotate, OpKind::Cutout}, kGeo16};
  const Pipeline p = sample_pipeline(rng, two, 5);
  EXPECT_EQ(p.ops.size(), 5u);
}

TEST(SamplePipeline, KindFrequenciesAreUniform) {
  const OpRegistry registry = OpRegistry::full(kGeo16);
  RngStream rng(2023);
  constexpr int kDraws = 1'000'000;
  std::array<long, kNumOpKinds> counts{};
  for (int i = 0; i < kDraws; ++i) {
    for (const auto& o : sample_pipeline(rng, registry, 2).ops) {
      ++counts[static_cast<std::size_t>(o.kind)];
    }
  }
  const double expected = 2.0 * kDraws / kNumOpKinds;
  double chi2 = 0.0;
  for (long c : counts) {
    EXPECT_NEAR(c / expected, 1.0, 0.01);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 99.9th percentile of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 27.877);
}

TEST(SamplePipeline, LevelsAreUniform) {
  const OpRegistry registry{{OpKind::Cutout}, kGeo16};
  RngStream rng(8);
  std::array<long, 16> cx{};
  constexpr int kDraws = 160'000;
  for (int i = 0; i < kDraws; ++i) ++cx[static_cast<std::size_t>(sample_pipeline(rng, registry, 1).ops[0].levels[1])];
  for (long c : cx) EXPECT_NEAR(c / (kDraws / 16.0), 1.0, 0.05);
}

TEST(SamplePipeline, ConfigErrors) {
  RngStream rng(1);
  EXPECT_THROW(sample_pipeline(rng, OpRegistry{{}, kGeo16}, 1), ConfigError);
  EXPECT_THROW(sample_pipeline(rng, OpRegistry::full(kGeo16), 0), ConfigError);
}

TEST(AdaptableParams, Examples) {
  const Pipeline rotate{kGeo16, {op(OpKind::Rotate, {4, 1})}};
  EXPECT_EQ(adaptable_params(rotate), (std::vector<ParamLocator>{{0, 0}}));
  const Pipeline rc{kGeo16, {op(OpKind::Rotate, {4, 1}), op(OpKind::Cutout, {2, 3, 4})}};
  EXPECT_EQ(adaptable_params(rc),
            (std::vector<ParamLocator>{{0, 0}, {1, 0}, {1, 1}, {1, 2}}));
}

TEST(AdaptableParams, DirectionIsNeverAdaptable) {
  for (OpKind kind : all_op_kinds()) {
    const auto specs = param_specs(kind, kGeo16);
    for (std::size_t j = 0; j < specs.size(); ++j) {
      if (specs[j].name == "direction") {
        EXPECT_FALSE(specs[j].adaptable);
      }
    }
  }
}

TEST(PipelineHelpers, WithLevelEditsOneScalar) {
  const Pipeline p{kGeo16, {op(OpKind::Rotate, {4, 1}), op(OpKind::Cutout, {2, 3, 4})}};
  const Pipeline q = with_level(p, {1, 2}, 9);
  EXPECT_EQ(level_at(q, {1, 2}), 9);
  EXPECT_EQ(level_at(q, {0, 0}), 4);
  EXPECT_EQ(spec_at(q, {1, 2}).name, "center_y");
  EXPECT_EQ(describe(p), "Rotate[4,1] Cutout[2,3,4]");
}

}  // namespace
}  // namespace uada
