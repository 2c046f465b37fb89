#pragma once

#include <filesystem>
#include <string>

#include "uada/trainer.hpp"

namespace uada {

/// Writes content to path via a temporary sibling and rename, so readers never see a
/// partially written file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Versioned JSON document: format_version, config echo, seed, per-epoch records, totals.
std::string report_json(const RunReport& r);
/// Header "epoch,train_loss,loss_gap,test_acc,lr,fwd,bwd,cache_hits,seconds", one row per epoch.
std::string report_csv(const RunReport& r);
/// Header "label,strategy,epsilon,runs,mean_acc,sd_acc,accuracies".
std::string aggregate_csv(const ComparativeReport& r);

/// Writes report.json and report.csv into dir.
void write_run_report(const RunReport& r, const std::filesystem::path& dir);

}  // namespace uada
