#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uada/adapt.hpp"
#include "uada/data.hpp"
#include "uada/model.hpp"

namespace uada {

/// Flat "section.key = value" text. Blank lines and lines starting with '#' are ignored.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file.cfg:12" or "--set"
  };

  /// Throws ConfigError naming the path when the file cannot be read, or listing every
  /// malformed line.
  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_text(const std::string& text, const std::string& origin);

  /// Applies "key=value"; a key set twice keeps the last value and records a warning.
  void set(const std::string& key, const std::string& value, const std::string& origin);
  void apply_override(const std::string& assignment);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string> warnings_;
};

struct TrainerConfig {
  DatasetSpec data;
  std::string arch = "cnn-s";
  OptimConfig optim;
  AdaptConfig adapt;
  int n_ops = 2;
  std::vector<OpKind> ops;  // empty = all kinds
  int epochs = 10;
  int batch_size = 64;
  std::uint64_t master_seed = 0;
  int eval_every = 1;
  bool record_wall_time = false;
  std::filesystem::path output_dir = "runs/default";

  void validate() const;
  /// Canonical key/value echo; parsing it back yields an equal config.
  std::map<std::string, std::string> to_key_values() const;
  std::uint64_t hash() const;
};

/// Builds a TrainerConfig from defaults plus cfg. Unknown keys and bad values are all
/// collected and reported in one ConfigError, each with its origin.
TrainerConfig trainer_config_from(const KeyValueConfig& cfg);

/// Default configuration as config-file text.
std::string default_config_text();

}  // namespace uada
