#include "uada/adapt.hpp"

#include <algorithm>
#include <cstdlib>

#include "uada/errors.hpp"
#include "uada/parallel.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::MaximizeLoss:
      return "maximize";
    case Strategy::MinimizeLoss:
      return "minimize";
    case Strategy::RandomSign:
      return "random";
    case Strategy::None:
      return "none";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "maximize" || name == "MaximizeLoss") return Strategy::MaximizeLoss;
  if (name == "minimize" || name == "MinimizeLoss") return Strategy::MinimizeLoss;
  if (name == "random" || name == "RandomSign") return Strategy::RandomSign;
  if (name == "none" || name == "None") return Strategy::None;
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected maximize, minimize, random or none)");
}

void AdaptConfig::validate() const {
  if (std::abs(delta) < 1) throw ConfigError("adapt.delta must satisfy |delta| >= 1");
  if (epsilon < 1) throw ConfigError("adapt.epsilon must be >= 1");
}

double ModelLossEvaluator::loss(const Pipeline& p) const {
  const ImageBatch augmented = apply_pipeline(p, *batch_);
  return cross_entropy(forward(*model_, augmented), augmented.labels, Reduction::Mean);
}

double SignSource::normal(ParamLocator loc) const {
  RngStream rng(substream_seed(seed_, "sign", {static_cast<std::uint64_t>(loc.op_index),
                                               static_cast<std::uint64_t>(loc.param_index)}));
  return rng.normal();
}

std::size_t SignSource::pick(std::size_t n) const {
  RngStream rng(substream_seed(seed_, "pick"));
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

std::optional<int> perturbation_step(int level, int delta, const ParamSpec& spec) {
  if (spec.contains(level + delta)) return delta;
  if (spec.contains(level - delta)) return -delta;
  return std::nullopt;
}

GradEstimate estimate_gradient(const LossEvaluator& evaluator, const Pipeline& p,
                               ParamLocator loc, double base_loss, const AdaptConfig& cfg) {
  const ParamSpec spec = spec_at(p, loc);
  if (!spec.adaptable) {
    throw DomainError("locator (" + std::to_string(loc.op_index) + "," +
                      std::to_string(loc.param_index) + ") is not adaptable");
  }
  GradEstimate g;
  g.locator = loc;
  g.base_loss = base_loss;
  g.perturbed_loss = base_loss;
  g.delta_used = cfg.delta;

  const int level = level_at(p, loc);
  const auto step = perturbation_step(level, cfg.delta, spec);
  if (!step) return g;

  g.delta_used = *step;
  g.perturbed_loss = evaluator.loss(with_level(p, loc, level + *step));
  g.value = (g.perturbed_loss - base_loss) / static_cast<double>(*step);
  g.evaluated = true;
  return g;
}

Pipeline perturbed_pipeline(const Pipeline& p, const GradEstimate& g) {
  return with_level(p, g.locator, level_at(p, g.locator) + g.delta_used);
}

int sign_update(int level, double grad, const AdaptConfig& cfg, const ParamSpec& spec,
                double random_normal) {
  int direction = 0;
  switch (cfg.strategy) {
    case Strategy::MaximizeLoss:
      direction = sign_of(grad);
      break;
    case Strategy::MinimizeLoss:
      direction = -sign_of(grad);
      break;
    case Strategy::RandomSign:
      direction = sign_of(random_normal);
      break;
    case Strategy::None:
      return level;
  }
  return std::clamp(level + cfg.epsilon * direction, spec.min_level, spec.max_level);
}

std::vector<Candidate> propose_candidates(const Pipeline& p, std::span<const GradEstimate> grads,
                                          const AdaptConfig& cfg, const SignSource* signs) {
  if (cfg.strategy == Strategy::RandomSign && !signs) {
    throw ConfigError("RandomSign strategy requires a sign source");
  }
  std::vector<Candidate> out;
  out.reserve(grads.size());
  for (const GradEstimate& g : grads) {
    const ParamSpec spec = spec_at(p, g.locator);
    const double r = cfg.strategy == Strategy::RandomSign ? signs->normal(g.locator) : 0.0;
    const int updated = sign_update(level_at(p, g.locator), g.value, cfg, spec, r);
    out.push_back({g.locator, with_level(p, g.locator, updated)});
  }
  return out;
}

std::optional<double> LossCache::find(const Pipeline& p) const {
  for (const auto& [pipeline, loss] : entries) {
    if (pipeline == p) return loss;
  }
  return std::nullopt;
}

AdaptOutcome select_candidate(const LossEvaluator& evaluator,
                              const std::pair<Pipeline, double>& base,
                              std::span<const Candidate> candidates, const AdaptConfig& cfg,
                              const LossCache& cache, const SignSource* signs) {
  if (cfg.strategy == Strategy::RandomSign && !signs) {
    throw ConfigError("RandomSign strategy requires a sign source");
  }
  const std::uint64_t start = evaluator.forward_count();

  AdaptOutcome out;
  out.base_loss = base.second;
  out.candidate_losses.resize(candidates.size());

  std::vector<std::ptrdiff_t> pending;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.candidate_losses[i].first = candidates[i].locator;
    std::optional<double> known;
    if (candidates[i].pipeline == base.first) {
      known = base.second;
    } else {
      known = cache.find(candidates[i].pipeline);
    }
    if (known) {
      out.candidate_losses[i].second = *known;
      ++out.cache_hits;
    } else {
      pending.push_back(static_cast<std::ptrdiff_t>(i));
    }
  }
  parallel_for(static_cast<std::ptrdiff_t>(pending.size()), [&](std::ptrdiff_t k) {
    const auto i = static_cast<std::size_t>(pending[static_cast<std::size_t>(k)]);
    out.candidate_losses[i].second = evaluator.loss(candidates[i].pipeline);
  });

  // Selection set: candidates in locator order, then the base.
  const std::size_t n_cand = candidates.size();
  const std::size_t set_size = n_cand + (cfg.include_original_in_selection ? 1 : 0);
  auto loss_of = [&](std::size_t i) {
    return i < n_cand ? out.candidate_losses[i].second : base.second;
  };

  std::size_t best = n_cand;  // the base, used when the set is empty
  if (set_size > 0) {
    switch (cfg.strategy) {
      case Strategy::MaximizeLoss:
        best = 0;
        for (std::size_t i = 1; i < set_size; ++i) {
          if (loss_of(i) > loss_of(best)) best = i;
        }
        break;
      case Strategy::MinimizeLoss:
        best = 0;
        for (std::size_t i = 1; i < set_size; ++i) {
          if (loss_of(i) < loss_of(best)) best = i;
        }
        break;
      case Strategy::RandomSign:
        best = signs->pick(set_size);
        break;
      case Strategy::None:
        best = n_cand;
        break;
    }
  }

  if (best < n_cand) {
    out.chosen = candidates[best].pipeline;
    out.chosen_loss = out.candidate_losses[best].second;
    out.chosen_locator = candidates[best].locator;
  } else {
    out.chosen = base.first;
    out.chosen_loss = base.second;
  }
  out.forward_evals = evaluator.forward_count() - start;
  return out;
}

AdaptOutcome adapt_step(const LossEvaluator& evaluator, const Pipeline& p,
                        const AdaptConfig& cfg, const SignSource* signs) {
  cfg.validate();
  const std::uint64_t start = evaluator.forward_count();
  const double base_loss = evaluator.loss(p);

  if (cfg.strategy == Strategy::None) {
    AdaptOutcome out;
    out.chosen = p;
    out.chosen_loss = base_loss;
    out.base_loss = base_loss;
    out.forward_evals = evaluator.forward_count() - start;
    return out;
  }

  const auto locators = adaptable_params(p);
  std::vector<GradEstimate> grads(locators.size());
  parallel_for(static_cast<std::ptrdiff_t>(locators.size()), [&](std::ptrdiff_t i) {
    const auto k = static_cast<std::size_t>(i);
    grads[k] = estimate_gradient(evaluator, p, locators[k], base_loss, cfg);
  });

  LossCache cache;
  std::uint64_t skipped = 0;
  for (const GradEstimate& g : grads) {
    if (g.evaluated) {
      cache.entries.emplace_back(perturbed_pipeline(p, g), g.perturbed_loss);
    } else {
      ++skipped;
    }
  }

  const auto candidates = propose_candidates(p, grads, cfg, signs);
  AdaptOutcome out = select_candidate(evaluator, {p, base_loss}, candidates, cfg, cache, signs);
  out.gradients = std::move(grads);
  out.num_adaptable = static_cast<int>(locators.size());
  out.cache_hits += skipped;
  out.forward_evals = evaluator.forward_count() - start;
  return out;
}

}  // namespace uada
