#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "test_support.hpp"
#include "uada/adapt.hpp"
#include "uada/errors.hpp"
#include "uada/oracle_check.hpp"
#include "uada/parallel.hpp"

namespace uada {
namespace {

constexpr ImageGeometry kGeo{16, 16};

Pipeline rotate_at(int level) { return Pipeline{kGeo, {OpInstance{OpKind::Rotate, {level, 1}}}}; }

LatticeFunctionEvaluator quadratic() {
  return LatticeFunctionEvaluator({0, 0}, [](int l) { return double(l - 3) * double(l - 3); });
}

/// Loss looked up by pipeline description; unknown pipelines fall back to a default.
class TableEvaluator final : public LossEvaluator {
 public:
  TableEvaluator(std::map<std::string, double> table, double fallback)
      : table_(std::move(table)), fallback_(fallback) {}
  double loss(const Pipeline& p) const override {
    calls_.fetch_add(1);
    const auto it = table_.find(describe(p));
    return it == table_.end() ? fallback_ : it->second;
  }
  std::uint64_t forward_count() const override { return calls_.load(); }

 private:
  std::map<std::string, double> table_;
  double fallback_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Sum of independent per-locator functions, so each scalar has its own landscape.
class SeparableEvaluator final : public LossEvaluator {
 public:
  explicit SeparableEvaluator(std::uint64_t seed) : seed_(seed) {}
  double loss(const Pipeline& p) const override {
    calls_.fetch_add(1);
    double total = 0.0;
    for (const ParamLocator& loc : adaptable_params(p)) {
      RngStream rng(substream_seed(seed_, "f", {std::uint64_t(loc.op_index),
                                                std::uint64_t(loc.param_index),
                                                std::uint64_t(level_at(p, loc))}));
      total += rng.uniform01();
    }
    return total;
  }
  std::uint64_t forward_count() const override { return calls_.load(); }

 private:
  std::uint64_t seed_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

AdaptConfig config(Strategy s, int epsilon = 1, int delta = 1, bool include_original = true) {
  AdaptConfig c;
  c.strategy = s;
  c.epsilon = epsilon;
  c.delta = delta;
  c.include_original_in_selection = include_original;
  return c;
}

TEST(EstimateGradient, QuadraticOracle) {
  const auto eval = quadratic();
  const Pipeline p = rotate_at(1);
  const GradEstimate g = estimate_gradient(eval, p, {0, 0}, eval.loss(p), config(Strategy::MaximizeLoss));
  EXPECT_EQ(g.value, -3.0);
  EXPECT_EQ(g.delta_used, 1);
  EXPECT_EQ(g.base_loss, 4.0);
  EXPECT_EQ(g.perturbed_loss, 1.0);
  EXPECT_TRUE(g.evaluated);
  EXPECT_EQ(eval.forward_count(), 2u);
}

TEST(EstimateGradient, ConstantEvaluatorGivesZero) {
  const LatticeFunctionEvaluator eval({0, 0}, [](int) { return 0.731; });
  for (int level = 0; level <= 9; ++level) {
    const GradEstimate g =
        estimate_gradient(eval, rotate_at(level), {0, 0}, 0.731, config(Strategy::MaximizeLoss));
    EXPECT_EQ(g.value, 0.0);
  }
}

TEST(EstimateGradient, ReflectsAtUpperBound) {
  const auto eval = quadratic();
  const GradEstimate g =
      estimate_gradient(eval, rotate_at(9), {0, 0}, 36.0, config(Strategy::MaximizeLoss));
  EXPECT_EQ(g.delta_used, -1);
  EXPECT_EQ(g.perturbed_loss, 25.0);
  EXPECT_EQ(g.value, (25.0 - 36.0) / -1.0);
  EXPECT_EQ(g.value, 11.0);
}

TEST(EstimateGradient, ReflectsAtLowerBoundWithNegativeDelta) {
  const auto eval = quadratic();
  const GradEstimate g =
      estimate_gradient(eval, rotate_at(0), {0, 0}, 9.0, config(Strategy::MaximizeLoss, 1, -1));
  EXPECT_EQ(g.delta_used, 1);
  EXPECT_EQ(g.value, 4.0 - 9.0);
}

TEST(EstimateGradient, LargeDeltaReflection) {
  const auto eval = quadratic();
  const GradEstimate g =
      estimate_gradient(eval, rotate_at(7), {0, 0}, 16.0, config(Strategy::MaximizeLoss, 1, 3));
  EXPECT_EQ(g.delta_used, -3);
  EXPECT_EQ(g.value, (1.0 - 16.0) / -3.0);
}

TEST(EstimateGradient, SingleLevelLatticeNeedsNoEvaluation) {
  ParamSpec single{"x", 4, 4, std::nullopt, true};
  EXPECT_FALSE(perturbation_step(4, 1, single).has_value());
  const Pipeline cutout1x1{{1, 1}, {OpInstance{OpKind::Cutout, {3, 0, 0}}}};
  const LatticeFunctionEvaluator eval({0, 1}, [](int) { return 1.0; });
  const GradEstimate g =
      estimate_gradient(eval, cutout1x1, {0, 1}, 1.0, config(Strategy::MaximizeLoss));
  EXPECT_FALSE(g.evaluated);
  EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(eval.forward_count(), 0u);
}

TEST(EstimateGradient, RejectsNonAdaptableLocator) {
  const auto eval = quadratic();
  EXPECT_THROW(estimate_gradient(eval, rotate_at(2), {0, 1}, 1.0, config(Strategy::MaximizeLoss)),
               DomainError);
}

TEST(EstimateGradientProperty, FiniteDifferenceIdentityWithinOneUlp) {
  RngStream rng(17);
  const OpRegistry registry = OpRegistry::full(kGeo);
  for (int trial = 0; trial < 500; ++trial) {
    const SeparableEvaluator eval(static_cast<std::uint64_t>(trial));
    const Pipeline p = sample_pipeline(rng, registry, 3);
    const double base = eval.loss(p);
    for (const ParamLocator& loc : adaptable_params(p)) {
      const int delta = static_cast<int>(rng.uniform_int(1, 3)) * (trial % 2 ? 1 : -1);
      const GradEstimate g =
          estimate_gradient(eval, p, loc, base, config(Strategy::MaximizeLoss, 1, delta));
      if (!g.evaluated) continue;
      EXPECT_EQ(std::abs(g.delta_used), std::abs(delta));
      const double lhs = g.value * g.delta_used + base;
      EXPECT_LE(std::abs(lhs - g.perturbed_loss),
                std::abs(std::nextafter(g.perturbed_loss, 1e300) - g.perturbed_loss));
    }
  }
}

TEST(SignUpdate, Examples) {
  const ParamSpec mag{"magnitude", 0, 9, 0, true};
  EXPECT_EQ(sign_update(1, -3.0, config(Strategy::MaximizeLoss), mag), 0);
  EXPECT_EQ(sign_update(9, 2.0, config(Strategy::MaximizeLoss), mag), 9);
  for (Strategy s : {Strategy::MaximizeLoss, Strategy::MinimizeLoss}) {
    EXPECT_EQ(sign_update(4, 0.0, config(s), mag), 4);
  }
  EXPECT_EQ(sign_update(1, -3.0, config(Strategy::MinimizeLoss), mag), 2);
  EXPECT_EQ(sign_update(5, 0.2, config(Strategy::MaximizeLoss, 3), mag), 8);
  EXPECT_EQ(sign_update(8, 0.2, config(Strategy::MaximizeLoss, 3), mag), 9);
  EXPECT_EQ(sign_update(1, 0.2, config(Strategy::MinimizeLoss, 2), mag), 0);
  EXPECT_EQ(sign_update(4, 5.0, config(Strategy::RandomSign), mag, -0.3), 3);
  EXPECT_EQ(sign_update(4, -5.0, config(Strategy::RandomSign), mag, 1.7), 5);
  EXPECT_EQ(sign_update(4, 5.0, config(Strategy::RandomSign), mag, 0.0), 4);
  EXPECT_EQ(sign_update(4, 5.0, config(Strategy::None), mag), 4);
}

TEST(SignUpdateProperty, StaysInBounds) {
  RngStream rng(3);
  for (int i = 0; i < 10000; ++i) {
    const int lo = static_cast<int>(rng.uniform_int(0, 5));
    const ParamSpec spec{"p", lo, lo + static_cast<int>(rng.uniform_int(0, 10)), std::nullopt, true};
    const int level = static_cast<int>(rng.uniform_int(spec.min_level, spec.max_level));
    const auto s = static_cast<Strategy>(rng.uniform_int(0, 2));
    const int out = sign_update(level, rng.normal(), config(s, static_cast<int>(rng.uniform_int(1, 4))),
                                spec, rng.normal());
    ASSERT_TRUE(spec.contains(out));
  }
}

TEST(ProposeCandidates, OneScalarEditPerLocator) {
  const Pipeline p{kGeo, {OpInstance{OpKind::Rotate, {4, 1}}, OpInstance{OpKind::Cutout, {2, 3, 15}}}};
  std::vector<GradEstimate> grads;
  const std::vector<double> values = {1.0, -2.0, 0.0, 0.5};
  const auto locs = adaptable_params(p);
  for (std::size_t i = 0; i < locs.size(); ++i) {
    GradEstimate g;
    g.locator = locs[i];
    g.value = values[i];
    grads.push_back(g);
  }
  const auto cands = propose_candidates(p, grads, config(Strategy::MaximizeLoss));
  ASSERT_EQ(cands.size(), 4u);
  EXPECT_EQ(level_at(cands[0].pipeline, {0, 0}), 5);
  EXPECT_EQ(level_at(cands[1].pipeline, {1, 0}), 1);
  EXPECT_EQ(cands[2].pipeline, p);
  EXPECT_EQ(level_at(cands[3].pipeline, {1, 2}), 15);
  for (const Candidate& c : cands) {
    int diffs = 0;
    for (const ParamLocator& loc : adaptable_params(p)) diffs += level_at(c.pipeline, loc) != level_at(p, loc);
    EXPECT_LE(diffs, 1);
    EXPECT_EQ(p.ops[0].levels[1], c.pipeline.ops[0].levels[1]);
  }
  EXPECT_TRUE(propose_candidates(p, {}, config(Strategy::MaximizeLoss)).empty());
  EXPECT_THROW(propose_candidates(p, grads, config(Strategy::RandomSign)), ConfigError);
}

struct SelectionFixture {
  Pipeline base{kGeo, {OpInstance{OpKind::Cutout, {4, 4, 4}}}};
  std::vector<Candidate> candidates{{{0, 0}, with_level(base, {0, 0}, 5)},
                                    {{0, 1}, with_level(base, {0, 1}, 5)},
                                    {{0, 2}, with_level(base, {0, 2}, 5)}};
  TableEvaluator eval{{{describe(candidates[0].pipeline), 0.9},
                       {describe(candidates[1].pipeline), 1.4},
                       {describe(candidates[2].pipeline), 1.1}},
                      1.0};
};

TEST(SelectCandidate, MaximizePicksLargestLoss) {
  SelectionFixture f;
  const AdaptOutcome out =
      select_candidate(f.eval, {f.base, 1.0}, f.candidates, config(Strategy::MaximizeLoss));
  EXPECT_EQ(out.chosen_loss, 1.4);
  EXPECT_EQ(out.chosen, f.candidates[1].pipeline);
  ASSERT_TRUE(out.chosen_locator.has_value());
  EXPECT_EQ(*out.chosen_locator, (ParamLocator{0, 1}));
  EXPECT_EQ(out.forward_evals, 3u);
  EXPECT_EQ(out.cache_hits, 0u);
}

TEST(SelectCandidate, MinimizePicksSmallestLoss) {
  SelectionFixture f;
  const AdaptOutcome out =
      select_candidate(f.eval, {f.base, 1.0}, f.candidates, config(Strategy::MinimizeLoss));
  EXPECT_EQ(out.chosen_loss, 0.9);
  EXPECT_EQ(out.chosen, f.candidates[0].pipeline);
}

TEST(SelectCandidate, BaseWinsOnlyWhenStrictlyBetter) {
  SelectionFixture f;
  AdaptOutcome out =
      select_candidate(f.eval, {f.base, 2.0}, f.candidates, config(Strategy::MaximizeLoss));
  EXPECT_EQ(out.chosen, f.base);
  EXPECT_FALSE(out.chosen_locator.has_value());
  out = select_candidate(f.eval, {f.base, 1.4}, f.candidates, config(Strategy::MaximizeLoss));
  EXPECT_EQ(out.chosen, f.candidates[1].pipeline);
  out = select_candidate(f.eval, {f.base, 2.0}, f.candidates,
                         config(Strategy::MaximizeLoss, 1, 1, false));
  EXPECT_EQ(out.chosen_loss, 1.4);
}

TEST(SelectCandidate, TiesGoToLowestLocator) {
  const Pipeline base{kGeo, {OpInstance{OpKind::Cutout, {4, 4, 4}}}};
  const std::vector<Candidate> cands{{{0, 0}, with_level(base, {0, 0}, 5)},
                                     {{0, 1}, with_level(base, {0, 1}, 5)},
                                     {{0, 2}, with_level(base, {0, 2}, 5)}};
  const TableEvaluator eval({{describe(cands[0].pipeline), 0.5}}, 1.2);
  const AdaptOutcome out = select_candidate(eval, {base, 1.2}, cands, config(Strategy::MaximizeLoss));
  EXPECT_EQ(*out.chosen_locator, (ParamLocator{0, 1}));
  const AdaptOutcome low = select_candidate(eval, {base, 0.5}, cands, config(Strategy::MinimizeLoss));
  EXPECT_EQ(*low.chosen_locator, (ParamLocator{0, 0}));
}

TEST(SelectCandidate, AllCandidatesEqualBaseRetainsBase) {
  const Pipeline base = rotate_at(4);
  const std::vector<Candidate> cands{{{0, 0}, base}};
  const TableEvaluator eval({}, 3.0);
  const AdaptOutcome out = select_candidate(eval, {base, 0.7}, cands, config(Strategy::MaximizeLoss));
  EXPECT_EQ(out.chosen, base);
  EXPECT_EQ(out.chosen_loss, 0.7);
  EXPECT_EQ(out.cache_hits, 1u);
  EXPECT_EQ(out.forward_evals, 0u);
}

TEST(SelectCandidate, ServesCachedPipelines) {
  SelectionFixture f;
  LossCache cache;
  cache.entries.emplace_back(f.candidates[2].pipeline, 1.1);
  const AdaptOutcome out = select_candidate(f.eval, {f.base, 1.0}, f.candidates,
                                            config(Strategy::MaximizeLoss), cache);
  EXPECT_EQ(out.cache_hits, 1u);
  EXPECT_EQ(out.forward_evals, 2u);
  EXPECT_EQ(out.candidate_losses[2].second, 1.1);
}

TEST(SelectCandidate, RandomSignIsSeededAndUniform) {
  SelectionFixture f;
  std::vector<int> hits(4, 0);
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const SignSource signs(s);
    const AdaptOutcome a = select_candidate(f.eval, {f.base, 1.0}, f.candidates,
                                            config(Strategy::RandomSign), {}, &signs);
    const AdaptOutcome b = select_candidate(f.eval, {f.base, 1.0}, f.candidates,
                                            config(Strategy::RandomSign), {}, &signs);
    ASSERT_EQ(a.chosen, b.chosen);
    ++hits[a.chosen_locator ? static_cast<std::size_t>(a.chosen_locator->param_index) : 3];
  }
  for (int h : hits) EXPECT_NEAR(h / 1000.0, 1.0, 0.15);
}

TEST(AdaptStep, NoneShortCircuits) {
  const auto eval = quadratic();
  const AdaptOutcome out = adapt_step(eval, rotate_at(6), config(Strategy::None));
  EXPECT_EQ(out.chosen, rotate_at(6));
  EXPECT_EQ(out.forward_evals, 1u);
  EXPECT_EQ(out.cache_hits, 0u);
  EXPECT_EQ(out.chosen_loss, 9.0);
}

TEST(AdaptStep, TwoLocatorsWithoutCacheHitsCostFive) {
  const Pipeline p{kGeo, {OpInstance{OpKind::Rotate, {5, 1}}, OpInstance{OpKind::Solarize, {5}}}};
  const TableEvaluator eval({{"Rotate[6,1] Solarize[5]", 0.5},
                             {"Rotate[5,1] Solarize[6]", 0.6},
                             {"Rotate[4,1] Solarize[5]", 1.3},
                             {"Rotate[5,1] Solarize[4]", 1.2}},
                            1.0);
  const AdaptOutcome out = adapt_step(eval, p, config(Strategy::MaximizeLoss));
  EXPECT_EQ(out.num_adaptable, 2);
  EXPECT_EQ(out.cache_hits, 0u);
  EXPECT_EQ(out.forward_evals, 5u);
  EXPECT_EQ(out.chosen_loss, 1.3);
  EXPECT_EQ(describe(out.chosen), "Rotate[4,1] Solarize[5]");
}

TEST(AdaptStep, QuadraticStepMovesTowardHigherLoss) {
  const auto eval = quadratic();
  const AdaptOutcome out = adapt_step(eval, rotate_at(1), config(Strategy::MaximizeLoss));
  EXPECT_EQ(level_at(out.chosen, {0, 0}), 0);
  EXPECT_EQ(out.chosen_loss, 9.0);
  EXPECT_EQ(out.gradients.at(0).value, -3.0);
  EXPECT_EQ(out.forward_evals, 3u);
}

TEST(AdaptStep, CandidateEqualToPerturbationIsCached) {
  const auto eval = quadratic();
  const AdaptOutcome out = adapt_step(eval, rotate_at(5), config(Strategy::MaximizeLoss));
  EXPECT_EQ(level_at(out.chosen, {0, 0}), 6);
  EXPECT_EQ(out.cache_hits, 1u);
  EXPECT_EQ(out.forward_evals, 2u);
}

TEST(AdaptStepProperty, InvariantsOnRandomLandscapes) {
  const OpRegistry registry = OpRegistry::full(kGeo);
  RngStream rng(71);
  for (int trial = 0; trial < 400; ++trial) {
    const SeparableEvaluator eval(static_cast<std::uint64_t>(trial) + 1000);
    const Pipeline p = sample_pipeline(rng, registry, 1 + trial % 3);
    for (Strategy s : {Strategy::MaximizeLoss, Strategy::MinimizeLoss, Strategy::RandomSign}) {
      const AdaptConfig cfg = config(s, 1 + trial % 3, trial % 2 ? 1 : -2, trial % 5 != 0);
      const SignSource signs(static_cast<std::uint64_t>(trial));
      const std::uint64_t before = eval.forward_count();
      const AdaptOutcome out = adapt_step(eval, p, cfg, &signs);
      const auto m = static_cast<std::uint64_t>(adaptable_params(p).size());
      ASSERT_EQ(out.forward_evals, 1 + 2 * m - out.cache_hits);
      ASSERT_EQ(eval.forward_count() - before, out.forward_evals);
      ASSERT_NO_THROW(validate_pipeline(out.chosen));
      int diffs = 0;
      for (const ParamLocator& loc : adaptable_params(p)) {
        diffs += level_at(out.chosen, loc) != level_at(p, loc);
      }
      ASSERT_LE(diffs, 1);
      ASSERT_EQ(out.chosen_loss, eval.loss(out.chosen));

      std::vector<double> set;
      for (const auto& [loc, loss] : out.candidate_losses) set.push_back(loss);
      if (cfg.include_original_in_selection) set.push_back(out.base_loss);
      if (s == Strategy::MaximizeLoss) {
        ASSERT_EQ(out.chosen_loss, *std::max_element(set.begin(), set.end()));
        if (cfg.include_original_in_selection) {
          ASSERT_GE(out.chosen_loss, out.base_loss);
        }
      } else if (s == Strategy::MinimizeLoss) {
        ASSERT_EQ(out.chosen_loss, *std::min_element(set.begin(), set.end()));
      }
    }
  }
}

TEST(AdaptStepProperty, SelectionMatchesBruteForce) {
  const OpRegistry registry = OpRegistry::full(kGeo);
  RngStream rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const SeparableEvaluator eval(static_cast<std::uint64_t>(trial) + 7);
    const Pipeline p = sample_pipeline(rng, registry, 2);
    for (Strategy s : {Strategy::MaximizeLoss, Strategy::MinimizeLoss}) {
      const AdaptConfig cfg = config(s);
      const AdaptOutcome out = adapt_step(eval, p, cfg);
      const auto [index, loss] = brute_force_selection(eval, p, cfg);
      ASSERT_EQ(out.chosen_loss, loss);
      const std::size_t m = adaptable_params(p).size();
      if (index == m) {
        ASSERT_FALSE(out.chosen_locator.has_value());
      } else {
        ASSERT_EQ(*out.chosen_locator, adaptable_params(p)[index]);
      }
    }
  }
}

TEST(AdaptStepProperty, IndependentOfWorkerCount) {
  const OpRegistry registry = OpRegistry::full(kGeo);
  const int saved = worker_count();
  for (int trial = 0; trial < 50; ++trial) {
    RngStream rng(static_cast<std::uint64_t>(trial));
    const Pipeline p = sample_pipeline(rng, registry, 3);
    const SeparableEvaluator eval(static_cast<std::uint64_t>(trial));
    const SignSource signs(9);
    set_worker_count(1);
    const AdaptOutcome a = adapt_step(eval, p, config(Strategy::RandomSign), &signs);
    set_worker_count(4);
    const AdaptOutcome b = adapt_step(eval, p, config(Strategy::RandomSign), &signs);
    ASSERT_EQ(a.chosen, b.chosen);
    ASSERT_EQ(a.candidate_losses, b.candidate_losses);
  }
  set_worker_count(saved);
}

TEST(AdaptConfigValidation, RejectsZeroSteps) {
  EXPECT_THROW(config(Strategy::MaximizeLoss, 0).validate(), ConfigError);
  EXPECT_THROW(config(Strategy::MaximizeLoss, 1, 0).validate(), ConfigError);
  EXPECT_NO_THROW(config(Strategy::MaximizeLoss, 2, -1).validate());
}

TEST(StrategyNames, RoundTrip) {
  for (Strategy s : {Strategy::MaximizeLoss, Strategy::MinimizeLoss, Strategy::RandomSign, Strategy::None}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_EQ(parse_strategy("MaximizeLoss"), Strategy::MaximizeLoss);
  EXPECT_THROW(parse_strategy("adversarial"), ConfigError);
}

TEST(OracleChecks, AllPass) {
  OracleCheckOptions opts;
  opts.selection_instances = 10;
  opts.nondecrease_batches = 10;
  for (const CheckResult& r : run_oracle_checks(opts)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace
}  // namespace uada
