#include "uada/oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uada/data.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

bool within_one_ulp(double a, double b) {
  return a == b || std::nextafter(a, b) == b;
}

Pipeline single_op(OpKind kind, std::vector<int> levels) {
  return Pipeline{{16, 16}, {OpInstance{kind, std::move(levels)}}};
}

}  // namespace

std::pair<std::size_t, double> brute_force_selection(const LossEvaluator& evaluator,
                                                     const Pipeline& p, const AdaptConfig& cfg) {
  const double base = evaluator.loss(p);
  std::vector<double> set;
  for (const ParamLocator& loc : adaptable_params(p)) {
    const ParamSpec spec = spec_at(p, loc);
    const int level = level_at(p, loc);
    int step = cfg.delta;
    if (!spec.contains(level + step)) step = -step;
    int direction = 0;
    if (spec.contains(level + step)) {
      const double perturbed = evaluator.loss(with_level(p, loc, level + step));
      const double g = (perturbed - base) / step;
      direction = (g > 0) - (g < 0);
      if (cfg.strategy == Strategy::MinimizeLoss) direction = -direction;
    }
    const int updated =
        std::min(spec.max_level, std::max(spec.min_level, level + cfg.epsilon * direction));
    set.push_back(evaluator.loss(with_level(p, loc, updated)));
  }
  if (cfg.include_original_in_selection || set.empty()) set.push_back(base);
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.size(); ++i) {
    const bool better = cfg.strategy == Strategy::MinimizeLoss ? set[i] < set[best]
                                                               : set[i] > set[best];
    if (better) best = i;
  }
  return {best, set[best]};
}

std::vector<CheckResult> run_oracle_checks(const OracleCheckOptions& opts) {
  std::vector<CheckResult> out;
  const AdaptConfig cfg;  // delta = epsilon = 1, MaximizeLoss
  const ParamLocator rot{0, 0};
  auto quadratic = [](int level) { return static_cast<double>((level - 3) * (level - 3)); };

  {
    LatticeFunctionEvaluator ev(rot, quadratic);
    const Pipeline p = single_op(OpKind::Rotate, {1, 1});
    const GradEstimate g = estimate_gradient(ev, p, rot, ev.loss(p), cfg);
    std::ostringstream d;
    d << "G = " << g.value << " at level 1 (expected -3)";
    out.push_back({"quadratic gradient", g.value == -3.0 && g.delta_used == 1, d.str()});
  }
  {
    LatticeFunctionEvaluator ev(rot, [](int) { return 0.75; });
    const Pipeline p = single_op(OpKind::Rotate, {4, 0});
    const GradEstimate g = estimate_gradient(ev, p, rot, ev.loss(p), cfg);
    out.push_back({"constant gradient", g.value == 0.0, "G = " + std::to_string(g.value)});
  }
  {
    LatticeFunctionEvaluator ev(rot, quadratic);
    const Pipeline p = single_op(OpKind::Rotate, {9, 1});
    const double base = ev.loss(p);
    const GradEstimate g = estimate_gradient(ev, p, rot, base, cfg);
    const double expected = (quadratic(8) - quadratic(9)) / -1.0;
    const bool ok = g.delta_used == -1 && g.value == expected &&
                    within_one_ulp(g.value * g.delta_used + base, g.perturbed_loss);
    std::ostringstream d;
    d << "delta_used = " << g.delta_used << ", G = " << g.value << " (expected " << expected
      << ")";
    out.push_back({"boundary reflection", ok, d.str()});
  }

  // Frozen cnn-s: adapt_step selection against exhaustive recomputation.
  DatasetSpec dspec;
  dspec.train_count = 256;
  dspec.test_count = 1;
  dspec.seed = opts.seed + 1;
  const Dataset data = gen_synthetic(dspec, dspec.train_count, 0);
  const Model model(ModelSpec::cnn_s({1, 16, 16}, 3, substream_seed(opts.seed, "init")));
  const OpRegistry registry = OpRegistry::full({16, 16});

  {
    int agree = 0;
    std::string counterexample;
    for (int i = 0; i < opts.selection_instances; ++i) {
      RngStream rng = substream(opts.seed, "oracle-selection", {static_cast<std::uint64_t>(i)});
      std::vector<int> idx;
      for (int k = 0; k < opts.batch_size; ++k) {
        idx.push_back(static_cast<int>(rng.uniform_int(0, data.size() - 1)));
      }
      const ImageBatch batch = data.gather(idx);
      const Pipeline p = sample_pipeline(rng, registry, 2);
      const ModelLossEvaluator ev(model, batch);
      const AdaptOutcome got = adapt_step(ev, p, cfg);
      const auto [best, best_loss] = brute_force_selection(ev, p, cfg);
      const auto m = static_cast<std::size_t>(got.num_adaptable);
      const std::size_t got_index = got.chosen_locator
                                        ? static_cast<std::size_t>(
                                              std::find_if(got.candidate_losses.begin(),
                                                           got.candidate_losses.end(),
                                                           [&](const auto& c) {
                                                             return c.first == *got.chosen_locator;
                                                           }) -
                                              got.candidate_losses.begin())
                                        : m;
      if (got.chosen_loss == best_loss && got_index == best) {
        ++agree;
      } else if (counterexample.empty()) {
        std::ostringstream d;
        d << "instance " << i << " pipeline " << describe(p) << ": chosen " << got.chosen_loss
          << " (index " << got_index << "), exhaustive " << best_loss << " (index " << best
          << ")";
        counterexample = d.str();
      }
    }
    std::ostringstream d;
    d << agree << "/" << opts.selection_instances << " instances match";
    if (!counterexample.empty()) d << "; first mismatch: " << counterexample;
    out.push_back({"selection equals exhaustive max", agree == opts.selection_instances, d.str()});
  }

  {
    int held = 0;
    std::string counterexample;
    for (int i = 0; i < opts.nondecrease_batches; ++i) {
      RngStream rng = substream(opts.seed, "oracle-nondecrease", {static_cast<std::uint64_t>(i)});
      std::vector<int> idx;
      for (int k = 0; k < opts.batch_size; ++k) {
        idx.push_back(static_cast<int>(rng.uniform_int(0, data.size() - 1)));
      }
      const ImageBatch batch = data.gather(idx);
      const Pipeline p = sample_pipeline(rng, registry, 2);
      const ModelLossEvaluator ev(model, batch);
      const AdaptOutcome got = adapt_step(ev, p, cfg);
      if (got.chosen_loss >= got.base_loss) {
        ++held;
      } else if (counterexample.empty()) {
        std::ostringstream d;
        d << "batch " << i << " pipeline " << describe(p) << ": chosen " << got.chosen_loss
          << " < base " << got.base_loss;
        counterexample = d.str();
      }
    }
    std::ostringstream d;
    d << held << "/" << opts.nondecrease_batches << " batches with chosen >= base";
    if (!counterexample.empty()) d << "; " << counterexample;
    out.push_back({"non-decrease under maximize", held == opts.nondecrease_batches, d.str()});
  }
  return out;
}

}  // namespace uada
