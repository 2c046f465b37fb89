#include "uada/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "uada/errors.hpp"

namespace uada {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["format_version"] = r.format_version;
  j["config"] = r.config;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.config_hash));
  j["config_hash"] = hash;
  j["master_seed"] = r.master_seed;
  j["accuracy_policy"] = r.accuracy_policy;
  j["final_accuracy"] = r.final_accuracy;
  auto& epochs = j["epochs"] = nlohmann::ordered_json::array();
  for (const EpochRecord& e : r.epochs) {
    nlohmann::ordered_json je;
    je["epoch"] = e.epoch;
    je["train_loss"] = e.train_loss;
    je["loss_gap"] = e.loss_gap;
    je["test_accuracy"] = e.test_accuracy ? nlohmann::ordered_json(*e.test_accuracy) : nullptr;
    je["test_loss"] = e.test_loss ? nlohmann::ordered_json(*e.test_loss) : nullptr;
    je["lr"] = e.learning_rate;
    je["forwards"] = e.forwards;
    je["eval_forwards"] = e.eval_forwards;
    je["backwards"] = e.backwards;
    je["cache_hits"] = e.cache_hits;
    je["seconds"] = e.seconds;
    epochs.push_back(std::move(je));
  }
  j["totals"] = {{"forwards", r.total_forwards},
                 {"eval_forwards", r.total_eval_forwards},
                 {"backwards", r.total_backwards},
                 {"cache_hits", r.total_cache_hits}};
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.model_checksum));
  j["model_checksum"] = hash;
  return j.dump(2) + "\n";
}

std::string report_csv(const RunReport& r) {
  std::ostringstream os;
  os << "epoch,train_loss,loss_gap,test_acc,lr,fwd,bwd,cache_hits,seconds\n";
  for (const EpochRecord& e : r.epochs) {
    os << e.epoch << ',' << exact(e.train_loss) << ',' << exact(e.loss_gap) << ','
       << (e.test_accuracy ? exact(*e.test_accuracy) : std::string()) << ','
       << exact(e.learning_rate) << ',' << e.forwards << ',' << e.backwards << ','
       << e.cache_hits << ',' << fixed(e.seconds, 3) << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const ComparativeReport& r) {
  std::ostringstream os;
  os << "label,strategy,epsilon,runs,mean_acc,sd_acc,accuracies\n";
  for (const AggregateRow& row : r.rows) {
    os << row.label << ',' << to_string(row.strategy) << ',' << row.epsilon << ','
       << row.accuracies.size() << ',' << fixed(row.mean, 6) << ',' << fixed(row.sd, 6) << ',';
    for (std::size_t i = 0; i < row.accuracies.size(); ++i) {
      os << (i ? ";" : "") << fixed(row.accuracies[i], 6);
    }
    os << '\n';
  }
  return os.str();
}

void write_run_report(const RunReport& r, const std::filesystem::path& dir) {
  write_file_atomic(dir / "report.json", report_json(r));
  write_file_atomic(dir / "report.csv", report_csv(r));
}

}  // namespace uada
