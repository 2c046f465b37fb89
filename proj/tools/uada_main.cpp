// uada: adaptive data augmentation trainer.
//
//   uada train        --config run.cfg --set adapt.strategy=none --seed 3 --out runs/a
//   uada eval         --checkpoint runs/a/model.ckpt --config run.cfg
//   uada sweep-epsilon --epsilons 1,2,3 --seeds 0,1,2,3,4
//   uada ablation     --strategies maximize,minimize,random,none --seeds 0,1,2,3,4
//   uada oracle-check
//   uada gen-data     --out data/
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <omp.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uada/checkpoint.hpp"
#include "uada/config.hpp"
#include "uada/errors.hpp"
#include "uada/oracle_check.hpp"
#include "uada/parallel.hpp"
#include "uada/report.hpp"
#include "uada/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Flat key=value config file");
  cmd->add_option("--set", args.overrides, "Override KEY=VALUE (repeatable)");
  cmd->add_option("--seed", args.seed, "Master seed (overrides train.seed)");
  cmd->add_option("--out", args.out, "Output directory (overrides output.dir)");
  cmd->add_option("--workers", args.workers, "OpenMP worker count (default: logical CPUs)")
      ->check(CLI::NonNegativeNumber);
}

uada::TrainerConfig resolve_config(const CommonArgs& args) {
  uada::KeyValueConfig kv;
  if (!args.config_path.empty()) kv = uada::KeyValueConfig::from_file(args.config_path);
  for (const auto& o : args.overrides) kv.apply_override(o);
  if (args.seed) kv.set("train.seed", std::to_string(*args.seed), "--seed");
  if (!args.out.empty()) kv.set("output.dir", args.out, "--out");
  for (const auto& w : kv.warnings()) std::cerr << "warning: " << w << '\n';
  return uada::trainer_config_from(kv);
}

void apply_workers(const CommonArgs& args) {
  uada::set_worker_count(args.workers > 0 ? args.workers : omp_get_num_procs());
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw uada::ConfigError("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw uada::ConfigError("seed list is empty");
  return out;
}

void print_epoch(const uada::EpochRecord& e) {
  std::printf("epoch %3d  train_loss %.4f  gap %+.4f  test_acc %s  lr %.5f  fwd %llu\n",
              e.epoch, e.train_loss, e.loss_gap,
              e.test_accuracy ? std::to_string(*e.test_accuracy).c_str() : "-",
              e.learning_rate, static_cast<unsigned long long>(e.forwards));
}

int cmd_train(const CommonArgs& args) {
  const uada::TrainerConfig cfg = resolve_config(args);
  apply_workers(args);
  uada::TrainResult r = uada::train(cfg);
  for (const auto& e : r.report.epochs) print_epoch(e);
  uada::write_run_report(r.report, cfg.output_dir);
  uada::save_checkpoint(r.model, cfg.output_dir / "model.ckpt");
  std::string echo;
  for (const auto& [k, v] : cfg.to_key_values()) echo += k + " = " + v + "\n";
  uada::write_file_atomic(cfg.output_dir / "config.cfg", echo);
  std::printf("final accuracy %.4f  (report in %s)\n", r.report.final_accuracy,
              cfg.output_dir.string().c_str());
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
  const uada::TrainerConfig cfg = resolve_config(args);
  apply_workers(args);
  const uada::Model model = uada::load_checkpoint(checkpoint);
  const uada::DatasetPair data = uada::load_dataset(cfg.data);
  const uada::EvalResult ev = uada::evaluate(model, data.test);
  std::printf("accuracy %.6f  mean_loss %.6f  samples %d\n", ev.accuracy, ev.mean_loss,
              data.test.size());
  if (!args.out.empty()) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\n  \"format_version\": 1,\n  \"accuracy\": %.17g,\n  \"mean_loss\": %.17g,\n"
                  "  \"samples\": %d\n}\n",
                  ev.accuracy, ev.mean_loss, data.test.size());
    uada::write_file_atomic(std::filesystem::path(args.out) / "eval.json", buf);
  }
  return kExitOk;
}

uada::RunObserver run_writer(const std::filesystem::path& root, bool by_epsilon) {
  return [root, by_epsilon](const uada::AggregateRow& row, std::uint64_t seed,
                            const uada::TrainResult& r) {
    const std::string name = (by_epsilon ? "eps" + std::to_string(row.epsilon)
                                         : std::string(uada::to_string(row.strategy))) +
                             "_seed" + std::to_string(seed);
    uada::write_run_report(r.report, root / "runs" / name);
    std::printf("%-10s seed %-4llu accuracy %.4f\n", row.label.c_str(),
                static_cast<unsigned long long>(seed), r.report.final_accuracy);
    std::fflush(stdout);
  };
}

void print_aggregate(const uada::ComparativeReport& rep) {
  for (const auto& row : rep.rows) {
    std::printf("%-10s mean %.4f  sd %.4f  (n=%zu)\n", row.label.c_str(), row.mean, row.sd,
                row.accuracies.size());
  }
}

int cmd_sweep(const CommonArgs& args, const std::string& epsilons, const std::string& seeds) {
  const uada::TrainerConfig cfg = resolve_config(args);
  apply_workers(args);
  std::vector<int> eps;
  for (auto s : parse_seeds(epsilons)) eps.push_back(static_cast<int>(s));
  const auto rep = uada::run_epsilon_sweep(cfg, eps, parse_seeds(seeds),
                                           run_writer(cfg.output_dir, true));
  uada::write_file_atomic(cfg.output_dir / "aggregate.csv", uada::aggregate_csv(rep));
  print_aggregate(rep);
  return kExitOk;
}

int cmd_ablation(const CommonArgs& args, const std::string& strategies, const std::string& seeds) {
  const uada::TrainerConfig cfg = resolve_config(args);
  apply_workers(args);
  std::vector<uada::Strategy> list;
  std::stringstream ss(strategies);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) list.push_back(uada::parse_strategy(item));
  }
  if (list.empty()) throw uada::ConfigError("strategy list is empty");
  const auto rep =
      uada::run_ablation(cfg, list, parse_seeds(seeds), run_writer(cfg.output_dir, false));
  uada::write_file_atomic(cfg.output_dir / "aggregate.csv", uada::aggregate_csv(rep));
  print_aggregate(rep);
  return kExitOk;
}

int cmd_oracle_check(const CommonArgs& args, const uada::OracleCheckOptions& opts) {
  apply_workers(args);
  bool all = true;
  for (const auto& r : uada::run_oracle_checks(opts)) {
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  return all ? kExitOk : kExitRuntime;
}

int cmd_gen_data(const CommonArgs& args) {
  uada::TrainerConfig cfg = resolve_config(args);
  if (cfg.data.source != uada::DataSource::Synthetic) {
    throw uada::ConfigError("gen-data requires data.source = synthetic");
  }
  apply_workers(args);
  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  const uada::DatasetPair d = uada::gen_synthetic(cfg.data);
  uada::write_idx(d.train, dir / "train-images.idx", dir / "train-labels.idx");
  uada::write_idx(d.test, dir / "test-images.idx", dir / "test-labels.idx");
  const std::string snippet =
      "data.source = idx\n"
      "data.num_classes = " + std::to_string(cfg.data.num_classes) + "\n" +
      "data.train_images = " + (dir / "train-images.idx").string() + "\n" +
      "data.train_labels = " + (dir / "train-labels.idx").string() + "\n" +
      "data.test_images = " + (dir / "test-images.idx").string() + "\n" +
      "data.test_labels = " + (dir / "test-labels.idx").string() + "\n";
  uada::write_file_atomic(dir / "data.cfg", snippet);
  std::printf("wrote %d train / %d test samples to %s (checksums %016llx / %016llx)\n",
              d.train.size(), d.test.size(), dir.string().c_str(),
              static_cast<unsigned long long>(d.train.checksum()),
              static_cast<unsigned long long>(d.test.checksum()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive adversarial data augmentation: training, sweeps and self-checks"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string checkpoint;
  std::string epsilons = "1,2,3";
  std::string seeds = "0,1,2,3,4";
  std::string strategies = "maximize,minimize,random,none";
  uada::OracleCheckOptions oracle;

  auto* train = app.add_subcommand("train", "Train one model and write its report");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  auto* sweep = app.add_subcommand("sweep-epsilon", "Step-size sweep against the baseline");
  auto* ablation = app.add_subcommand("ablation", "Compare update strategies over seeds");
  auto* check = app.add_subcommand("oracle-check", "Run the gradient/selection self-checks");
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as IDX files");
  for (auto* cmd : {train, eval, sweep, ablation, check, gen}) add_common(cmd, common);

  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sweep->add_option("--epsilons", epsilons, "Comma-separated step sizes");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds");
  ablation->add_option("--strategies", strategies, "Comma-separated strategies");
  ablation->add_option("--seeds", seeds, "Comma-separated seeds");
  check->add_option("--instances", oracle.selection_instances, "Selection instances");
  check->add_option("--batches", oracle.nondecrease_batches, "Non-decrease batches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(common);
    if (eval->parsed()) return cmd_eval(common, checkpoint);
    if (sweep->parsed()) return cmd_sweep(common, epsilons, seeds);
    if (ablation->parsed()) return cmd_ablation(common, strategies, seeds);
    if (check->parsed()) {
      if (common.seed) oracle.seed = *common.seed;
      return cmd_oracle_check(common, oracle);
    }
    if (gen->parsed()) return cmd_gen_data(common);
  } catch (const uada::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
