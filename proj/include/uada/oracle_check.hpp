#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "uada/adapt.hpp"

namespace uada {

/// Evaluator whose loss depends only on one lattice scalar: loss = f(level at locator).
/// Counts evaluations like a model-backed evaluator.
class LatticeFunctionEvaluator final : public LossEvaluator {
 public:
  LatticeFunctionEvaluator(ParamLocator loc, std::function<double(int)> f)
      : loc_(loc), f_(std::move(f)) {}

  double loss(const Pipeline& p) const override {
    calls_.fetch_add(1);
    return f_(level_at(p, loc_));
  }
  std::uint64_t forward_count() const override { return calls_.load(); }

 private:
  ParamLocator loc_;
  std::function<double(int)> f_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OracleCheckOptions {
  int selection_instances = 50;
  int nondecrease_batches = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Finite-difference cases on synthetic evaluators (quadratic, constant, boundary
/// reflection), selection versus exhaustive enumeration on a frozen cnn-s, and the
/// MaximizeLoss non-decrease invariant over random batches.
std::vector<CheckResult> run_oracle_checks(const OracleCheckOptions& opts = {});

/// Exhaustive recomputation of the selection set without caching: re-derives every
/// candidate from fresh perturbed evaluations and returns (best index, best loss) where
/// index M denotes the base pipeline.
std::pair<std::size_t, double> brute_force_selection(const LossEvaluator& evaluator,
                                                     const Pipeline& p, const AdaptConfig& cfg);

}  // namespace uada
