#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "uada/augment.hpp"
#include "uada/model.hpp"

namespace uada {

enum class Strategy { MaximizeLoss, MinimizeLoss, RandomSign, None };

std::string_view to_string(Strategy s);
/// Accepts "maximize", "minimize", "random", "none" (and the enum spellings). Throws ConfigError.
Strategy parse_strategy(std::string_view name);

struct AdaptConfig {
  int delta = 1;
  int epsilon = 1;
  Strategy strategy = Strategy::MaximizeLoss;
  bool include_original_in_selection = true;

  /// Throws ConfigError unless |delta| >= 1 and epsilon >= 1.
  void validate() const;
};

/// Scalar training loss of a frozen model on one batch under a given pipeline.
///
/// Implementations must be read-only and safe to call concurrently; forward_count()
/// must be the number of model forward passes issued so far.
class LossEvaluator {
 public:
  virtual ~LossEvaluator() = default;
  virtual double loss(const Pipeline& p) const = 0;
  virtual std::uint64_t forward_count() const = 0;
};

/// Augments the bound batch with the pipeline and returns mean cross-entropy of the model.
class ModelLossEvaluator final : public LossEvaluator {
 public:
  ModelLossEvaluator(const Model& model, const ImageBatch& batch)
      : model_(&model), batch_(&batch) {}

  double loss(const Pipeline& p) const override;
  std::uint64_t forward_count() const override { return model_->forward_count(); }

 private:
  const Model* model_;
  const ImageBatch* batch_;
};

/// Simulated gradient of the loss with respect to one lattice scalar.
struct GradEstimate {
  ParamLocator locator;
  double value = 0.0;
  double perturbed_loss = 0.0;
  double base_loss = 0.0;
  int delta_used = 0;
  /// False when the lattice admits no perturbation and no evaluation took place.
  bool evaluated = false;
};

/// Randomness for the RandomSign strategy. Draws are keyed by locator (and by a
/// selection tag), never by call order, so concurrent evaluation cannot reorder them.
class SignSource {
 public:
  explicit SignSource(std::uint64_t seed) : seed_(seed) {}
  /// Standard normal draw for a locator.
  double normal(ParamLocator loc) const;
  /// Uniform index in [0, n).
  std::size_t pick(std::size_t n) const;

 private:
  std::uint64_t seed_;
};

/// delta_used = delta, reflected to -delta when level + delta leaves the lattice. Returns
/// nullopt when neither direction is inside the lattice (e.g. a single-level spec).
std::optional<int> perturbation_step(int level, int delta, const ParamSpec& spec);

/// Finite-difference estimate (L(O + delta) - L(O)) / delta at one locator. Evaluates the
/// perturbed pipeline exactly once, or not at all when the lattice cannot be perturbed
/// (value 0).
GradEstimate estimate_gradient(const LossEvaluator& evaluator, const Pipeline& p,
                               ParamLocator loc, double base_loss, const AdaptConfig& cfg);

/// Pipeline with the locator's level moved by delta_used.
Pipeline perturbed_pipeline(const Pipeline& p, const GradEstimate& g);

/// Sign step on the lattice, clamped to the spec bounds. sign(0) = 0. RandomSign needs a
/// normal draw; pass it as random_normal.
int sign_update(int level, double grad, const AdaptConfig& cfg, const ParamSpec& spec,
                double random_normal = 0.0);

struct Candidate {
  ParamLocator locator;
  Pipeline pipeline;
};

/// One single-scalar edit of p per gradient estimate, in locator order.
std::vector<Candidate> propose_candidates(const Pipeline& p, std::span<const GradEstimate> grads,
                                          const AdaptConfig& cfg,
                                          const SignSource* signs = nullptr);

struct AdaptOutcome {
  Pipeline chosen;
  double chosen_loss = 0.0;
  double base_loss = 0.0;
  /// Nullopt when the base pipeline was retained.
  std::optional<ParamLocator> chosen_locator;
  std::vector<std::pair<ParamLocator, double>> candidate_losses;
  std::vector<GradEstimate> gradients;
  int num_adaptable = 0;
  std::uint64_t forward_evals = 0;
  std::uint64_t cache_hits = 0;
};

/// Pipelines whose loss is already known for the current batch.
struct LossCache {
  std::vector<std::pair<Pipeline, double>> entries;
  std::optional<double> find(const Pipeline& p) const;
};

/// Evaluates every candidate (served from cache where possible) and picks per strategy:
/// argmax (MaximizeLoss), argmin (MinimizeLoss), or uniform (RandomSign). Candidates are
/// ordered by locator, the base comes last, and ties resolve to the earliest entry.
/// forward_evals counts only the candidate evaluations issued here.
AdaptOutcome select_candidate(const LossEvaluator& evaluator,
                              const std::pair<Pipeline, double>& base,
                              std::span<const Candidate> candidates, const AdaptConfig& cfg,
                              const LossCache& cache = {}, const SignSource* signs = nullptr);

/// Base evaluation, gradient estimation at every adaptable locator, candidate proposal and
/// selection. Gradient and candidate evaluations run concurrently on the OpenMP pool.
/// forward_evals == 1 + 2M - cache_hits.
AdaptOutcome adapt_step(const LossEvaluator& evaluator, const Pipeline& p,
                        const AdaptConfig& cfg, const SignSource* signs = nullptr);

}  // namespace uada
