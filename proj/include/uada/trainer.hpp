#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uada/adapt.hpp"
#include "uada/config.hpp"
#include "uada/data.hpp"
#include "uada/model.hpp"

namespace uada {

inline constexpr int kReportFormatVersion = 1;

struct BatchRecord {
  int epoch = 0;
  int batch = 0;
  double base_loss = 0.0;
  double chosen_loss = 0.0;
  double train_loss = 0.0;
  int num_adaptable = 0;
  std::uint64_t forward_evals = 0;
  std::uint64_t cache_hits = 0;
  std::string sampled;
  std::string chosen;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean over batches of the loss the weights were updated on
  double loss_gap = 0.0;    // mean over batches of chosen_loss - base_loss
  std::optional<double> test_accuracy;
  std::optional<double> test_loss;
  double learning_rate = 0.0;  // at the epoch's first step
  std::uint64_t forwards = 0;   // training plus evaluation forward passes
  std::uint64_t eval_forwards = 0;
  std::uint64_t backwards = 0;
  std::uint64_t cache_hits = 0;
  double seconds = 0.0;  // zero unless wall-time recording is enabled
};

struct RunReport {
  int format_version = kReportFormatVersion;
  std::map<std::string, std::string> config;
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  std::vector<EpochRecord> epochs;
  double final_accuracy = 0.0;
  std::string accuracy_policy = "last_epoch";
  std::uint64_t total_forwards = 0;
  std::uint64_t total_eval_forwards = 0;
  std::uint64_t total_backwards = 0;
  std::uint64_t total_cache_hits = 0;
  std::uint64_t model_checksum = 0;
  /// Per-batch trace; kept in memory, not part of the on-disk report.
  std::vector<BatchRecord> batches;
};

struct TrainResult {
  RunReport report;
  Model model;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Top-1 accuracy (argmax ties resolve to the lowest class) and mean loss over the full
/// dataset, without augmentation.
EvalResult evaluate(const Model& m, const Dataset& d, int batch_size = 250);

/// Optional observer called after every batch (used by tests and progress output).
using BatchObserver = std::function<void(const BatchRecord&)>;

/// Runs the adaptive training loop over cfg.epochs epochs. Throws TrainingError on a
/// non-finite loss, naming the batch and the pipeline.
TrainResult train(const TrainerConfig& cfg, const BatchObserver& observer = {});
/// Same, on an already-loaded dataset.
TrainResult train(const TrainerConfig& cfg, const DatasetPair& data,
                  const BatchObserver& observer = {});

/// Model spec the trainer builds for cfg and the given data (init seed from the master seed).
ModelSpec model_spec_for(const TrainerConfig& cfg, const Dataset& train);

struct AggregateRow {
  std::string label;
  Strategy strategy = Strategy::None;
  int epsilon = 0;  // 0 for the non-adaptive baseline
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single run
};

struct ComparativeReport {
  std::vector<AggregateRow> rows;
  /// One report per (row, seed), row-major.
  std::vector<RunReport> runs;
};

/// Called before each run; lets callers persist per-run artefacts.
using RunObserver = std::function<void(const AggregateRow& row, std::uint64_t seed,
                                       const TrainResult& result)>;

/// One run per (strategy, seed); rows follow the order of strategies.
ComparativeReport run_ablation(const TrainerConfig& base, const std::vector<Strategy>& strategies,
                               const std::vector<std::uint64_t>& seeds,
                               const RunObserver& observer = {});

/// Baseline row (epsilon 0, strategy None) followed by one MaximizeLoss row per epsilon,
/// all on the same seeds.
ComparativeReport run_epsilon_sweep(const TrainerConfig& base, const std::vector<int>& epsilons,
                                    const std::vector<std::uint64_t>& seeds,
                                    const RunObserver& observer = {});

}  // namespace uada
