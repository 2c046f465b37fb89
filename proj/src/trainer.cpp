#include "uada/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "uada/errors.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

AggregateRow aggregate(AggregateRow row) {
  row.mean = mean_of(row.accuracies);
  row.sd = sample_sd(row.accuracies);
  return row;
}

}  // namespace

EvalResult evaluate(const Model& m, const Dataset& d, int batch_size) {
  const int n = d.size();
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<int> idx;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    idx.resize(static_cast<std::size_t>(end - start));
    std::iota(idx.begin(), idx.end(), start);
    const ImageBatch batch = d.gather(idx);
    const Logits logits = forward(m, batch);
    loss_sum += cross_entropy(logits, batch.labels, Reduction::Sum);
    for (int i = 0; i < logits.rows; ++i) {
      const auto row = logits.row(i);
      int best = 0;
      for (int c = 1; c < logits.cols; ++c) {
        if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
      }
      if (best == batch.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return {static_cast<double>(correct) / n, loss_sum / n};
}

ModelSpec model_spec_for(const TrainerConfig& cfg, const Dataset& train) {
  const TensorShape input{train.images.channels, train.images.height, train.images.width};
  return ModelSpec::by_name(cfg.arch, input, train.num_classes,
                            substream_seed(cfg.master_seed, "init"));
}

TrainResult train(const TrainerConfig& cfg, const BatchObserver& observer) {
  cfg.validate();
  return train(cfg, load_dataset(cfg.data), observer);
}

TrainResult train(const TrainerConfig& cfg, const DatasetPair& data,
                  const BatchObserver& observer) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;

  Model model(model_spec_for(cfg, data.train));
  const ImageGeometry geometry{data.train.images.height, data.train.images.width};
  OpRegistry registry = OpRegistry::full(geometry);
  if (!cfg.ops.empty()) registry.kinds = cfg.ops;

  RunReport report;
  report.config = cfg.to_key_values();
  report.config_hash = cfg.hash();
  report.master_seed = cfg.master_seed;

  const std::uint64_t shuffle_seed = substream_seed(cfg.master_seed, "shuffle");
  const long steps_per_epoch =
      (data.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const std::uint64_t fwd0 = model.forward_count();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = learning_rate_at(cfg.optim, step, total_steps);

    const auto plan = batches(data.train.size(), cfg.batch_size, shuffle_seed,
                              static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    double gap_sum = 0.0;
    std::uint64_t adapt_forwards = 0;

    for (std::size_t b = 0; b < plan.size(); ++b) {
      const ImageBatch batch = data.train.gather(plan[b]);
      const std::uint64_t e = static_cast<std::uint64_t>(epoch);
      RngStream sampler = substream(cfg.master_seed, "sample", {e, b});
      const Pipeline sampled = sample_pipeline(sampler, registry, cfg.n_ops);

      const ModelLossEvaluator evaluator(model, batch);
      const SignSource signs(substream_seed(cfg.master_seed, "random-sign", {e, b}));
      const AdaptOutcome outcome = adapt_step(evaluator, sampled, cfg.adapt, &signs);

      const std::uint64_t expected =
          1 + 2 * static_cast<std::uint64_t>(outcome.num_adaptable) - outcome.cache_hits;
      if (outcome.forward_evals != expected) {
        throw InternalError("forward budget mismatch at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(b));
      }
      if (cfg.adapt.strategy == Strategy::MaximizeLoss &&
          cfg.adapt.include_original_in_selection && outcome.chosen_loss < outcome.base_loss) {
        throw InternalError("chosen loss below base loss under MaximizeLoss");
      }

      const ImageBatch augmented = apply_pipeline(outcome.chosen, batch);
      BackwardResult br = backward(model, augmented);
      if (!std::isfinite(br.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(b) + " with pipeline " + describe(outcome.chosen));
      }
      if (!br.grads.all_finite()) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(b) + " with pipeline " +
                            describe(outcome.chosen));
      }
      sgd_step(model, br.grads, cfg.optim, step, total_steps);
      ++step;

      BatchRecord br_rec{epoch,
                         static_cast<int>(b),
                         outcome.base_loss,
                         outcome.chosen_loss,
                         br.loss,
                         outcome.num_adaptable,
                         outcome.forward_evals,
                         outcome.cache_hits,
                         describe(sampled),
                         describe(outcome.chosen)};
      loss_sum += br.loss;
      gap_sum += outcome.chosen_loss - outcome.base_loss;
      adapt_forwards += outcome.forward_evals;
      rec.cache_hits += outcome.cache_hits;
      ++rec.backwards;
      if (observer) observer(br_rec);
      report.batches.push_back(std::move(br_rec));
    }

    rec.train_loss = loss_sum / static_cast<double>(plan.size());
    rec.loss_gap = gap_sum / static_cast<double>(plan.size());

    const bool last = epoch + 1 == cfg.epochs;
    if (last || (epoch + 1) % cfg.eval_every == 0) {
      const std::uint64_t before = model.forward_count();
      const EvalResult ev = evaluate(model, data.test);
      rec.eval_forwards = model.forward_count() - before;
      rec.test_accuracy = ev.accuracy;
      rec.test_loss = ev.mean_loss;
    }
    rec.forwards = model.forward_count() - fwd0;
    if (rec.forwards != adapt_forwards + rec.eval_forwards) {
      throw InternalError("forward counter does not reconcile at epoch " + std::to_string(epoch));
    }
    if (cfg.record_wall_time) {
      rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    }

    report.total_forwards += rec.forwards;
    report.total_eval_forwards += rec.eval_forwards;
    report.total_backwards += rec.backwards;
    report.total_cache_hits += rec.cache_hits;
    report.epochs.push_back(rec);
  }

  report.final_accuracy = report.epochs.back().test_accuracy.value_or(0.0);
  report.model_checksum = model.checksum();
  return {std::move(report), std::move(model)};
}

ComparativeReport run_ablation(const TrainerConfig& base, const std::vector<Strategy>& strategies,
                               const std::vector<std::uint64_t>& seeds,
                               const RunObserver& observer) {
  base.validate();
  const DatasetPair data = load_dataset(base.data);
  ComparativeReport out;
  for (Strategy s : strategies) {
    AggregateRow row;
    row.label = std::string(to_string(s));
    row.strategy = s;
    row.epsilon = s == Strategy::None ? 0 : base.adapt.epsilon;
    row.seeds = seeds;
    for (std::uint64_t seed : seeds) {
      TrainerConfig cfg = base;
      cfg.adapt.strategy = s;
      cfg.master_seed = seed;
      TrainResult r = train(cfg, data);
      row.accuracies.push_back(r.report.final_accuracy);
      if (observer) observer(row, seed, r);
      out.runs.push_back(std::move(r.report));
    }
    out.rows.push_back(aggregate(std::move(row)));
  }
  return out;
}

ComparativeReport run_epsilon_sweep(const TrainerConfig& base, const std::vector<int>& epsilons,
                                    const std::vector<std::uint64_t>& seeds,
                                    const RunObserver& observer) {
  base.validate();
  const DatasetPair data = load_dataset(base.data);
  ComparativeReport out;

  std::vector<std::pair<Strategy, int>> plan = {{Strategy::None, 0}};
  for (int e : epsilons) {
    if (e < 1) throw ConfigError("sweep epsilons must be >= 1");
    plan.emplace_back(Strategy::MaximizeLoss, e);
  }
  for (const auto& [strategy, eps] : plan) {
    AggregateRow row;
    row.label = std::to_string(eps);
    row.strategy = strategy;
    row.epsilon = eps;
    row.seeds = seeds;
    for (std::uint64_t seed : seeds) {
      TrainerConfig cfg = base;
      cfg.adapt.strategy = strategy;
      if (eps > 0) cfg.adapt.epsilon = eps;
      cfg.master_seed = seed;
      TrainResult r = train(cfg, data);
      row.accuracies.push_back(r.report.final_accuracy);
      if (observer) observer(row, seed, r);
      out.runs.push_back(std::move(r.report));
    }
    out.rows.push_back(aggregate(std::move(row)));
  }
  return out;
}

}  // namespace uada
