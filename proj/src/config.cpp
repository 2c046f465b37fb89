#include "uada/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "uada/errors.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + s + "' is not a valid number");
  return v;
}

double parse_real(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + s + "' is not a valid real number");
  }
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + s + "' is not a boolean");
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string source_name(DataSource s) {
  switch (s) {
    case DataSource::Synthetic:
      return "synthetic";
    case DataSource::IdxFiles:
      return "idx";
    case DataSource::CifarBinary:
      return "cifar";
  }
  return "?";
}

using Setter = std::function<void(TrainerConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source",
       [](TrainerConfig& c, const std::string& v) {
         if (v == "synthetic") c.data.source = DataSource::Synthetic;
         else if (v == "idx") c.data.source = DataSource::IdxFiles;
         else if (v == "cifar") c.data.source = DataSource::CifarBinary;
         else throw ConfigError("expected synthetic, idx or cifar");
       }},
      {"data.num_classes", [](TrainerConfig& c, const std::string& v) { c.data.num_classes = parse_number<int>(v); }},
      {"data.channels", [](TrainerConfig& c, const std::string& v) { c.data.channels = parse_number<int>(v); }},
      {"data.height", [](TrainerConfig& c, const std::string& v) { c.data.height = parse_number<int>(v); }},
      {"data.width", [](TrainerConfig& c, const std::string& v) { c.data.width = parse_number<int>(v); }},
      {"data.train_count", [](TrainerConfig& c, const std::string& v) { c.data.train_count = parse_number<int>(v); }},
      {"data.test_count", [](TrainerConfig& c, const std::string& v) { c.data.test_count = parse_number<int>(v); }},
      {"data.seed", [](TrainerConfig& c, const std::string& v) { c.data.seed = parse_number<std::uint64_t>(v); }},
      {"data.jitter.orientation", [](TrainerConfig& c, const std::string& v) { c.data.jitter.orientation_deg = parse_real(v); }},
      {"data.jitter.position", [](TrainerConfig& c, const std::string& v) { c.data.jitter.position_px = parse_real(v); }},
      {"data.jitter.noise", [](TrainerConfig& c, const std::string& v) { c.data.jitter.noise_sigma = parse_real(v); }},
      {"data.jitter.thickness_min", [](TrainerConfig& c, const std::string& v) { c.data.jitter.thickness_min = parse_real(v); }},
      {"data.jitter.thickness_max", [](TrainerConfig& c, const std::string& v) { c.data.jitter.thickness_max = parse_real(v); }},
      {"data.jitter.brightness_min", [](TrainerConfig& c, const std::string& v) { c.data.jitter.brightness_min = parse_real(v); }},
      {"data.jitter.brightness_max", [](TrainerConfig& c, const std::string& v) { c.data.jitter.brightness_max = parse_real(v); }},
      {"data.train_images", [](TrainerConfig& c, const std::string& v) { c.data.train_images = v; }},
      {"data.train_labels", [](TrainerConfig& c, const std::string& v) { c.data.train_labels = v; }},
      {"data.test_images", [](TrainerConfig& c, const std::string& v) { c.data.test_images = v; }},
      {"data.test_labels", [](TrainerConfig& c, const std::string& v) { c.data.test_labels = v; }},
      {"data.cifar_train",
       [](TrainerConfig& c, const std::string& v) {
         c.data.cifar_train.clear();
         for (const auto& p : split_list(v)) c.data.cifar_train.emplace_back(p);
       }},
      {"data.cifar_test",
       [](TrainerConfig& c, const std::string& v) {
         c.data.cifar_test.clear();
         for (const auto& p : split_list(v)) c.data.cifar_test.emplace_back(p);
       }},
      {"model.arch",
       [](TrainerConfig& c, const std::string& v) {
         if (v != "mlp-s" && v != "cnn-s") throw ConfigError("expected mlp-s or cnn-s");
         c.arch = v;
       }},
      {"optim.lr", [](TrainerConfig& c, const std::string& v) { c.optim.learning_rate = parse_real(v); }},
      {"optim.momentum", [](TrainerConfig& c, const std::string& v) { c.optim.momentum = parse_real(v); }},
      {"optim.weight_decay", [](TrainerConfig& c, const std::string& v) { c.optim.weight_decay = parse_real(v); }},
      {"optim.schedule",
       [](TrainerConfig& c, const std::string& v) {
         if (v == "cosine") c.optim.schedule = LrSchedule::Cosine;
         else if (v == "constant") c.optim.schedule = LrSchedule::Constant;
         else throw ConfigError("expected cosine or constant");
       }},
      {"adapt.delta", [](TrainerConfig& c, const std::string& v) { c.adapt.delta = parse_number<int>(v); }},
      {"adapt.epsilon", [](TrainerConfig& c, const std::string& v) { c.adapt.epsilon = parse_number<int>(v); }},
      {"adapt.strategy", [](TrainerConfig& c, const std::string& v) { c.adapt.strategy = parse_strategy(v); }},
      {"adapt.include_original", [](TrainerConfig& c, const std::string& v) { c.adapt.include_original_in_selection = parse_bool(v); }},
      {"augment.n_ops", [](TrainerConfig& c, const std::string& v) { c.n_ops = parse_number<int>(v); }},
      {"augment.ops",
       [](TrainerConfig& c, const std::string& v) {
         c.ops.clear();
         if (v == "all") return;
         for (const auto& name : split_list(v)) c.ops.push_back(parse_op_kind(name));
       }},
      {"train.epochs", [](TrainerConfig& c, const std::string& v) { c.epochs = parse_number<int>(v); }},
      {"train.batch_size", [](TrainerConfig& c, const std::string& v) { c.batch_size = parse_number<int>(v); }},
      {"train.seed", [](TrainerConfig& c, const std::string& v) { c.master_seed = parse_number<std::uint64_t>(v); }},
      {"train.eval_every", [](TrainerConfig& c, const std::string& v) { c.eval_every = parse_number<int>(v); }},
      {"report.wall_time", [](TrainerConfig& c, const std::string& v) { c.record_wall_time = parse_bool(v); }},
      {"output.dir", [](TrainerConfig& c, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path.string());
}

KeyValueConfig KeyValueConfig::from_text(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected key=value, got '" + t + "'");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      errors.push_back(where + ": empty key");
      continue;
    }
    cfg.set(key, trim(t.substr(eq + 1)), where);
  }
  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value,
                         const std::string& origin) {
  const auto it = entries_.find(key);
  if (it != entries_.end()) {
    warnings_.push_back("'" + key + "' set at " + it->second.origin + " is overridden at " +
                        origin + " (last value wins)");
  }
  entries_[key] = Entry{value, origin};
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set");
}

void TrainerConfig::validate() const {
  data.validate();
  optim.validate();
  adapt.validate();
  if (n_ops < 1) throw ConfigError("augment.n_ops must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
}

std::map<std::string, std::string> TrainerConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["data.source"] = source_name(data.source);
  kv["data.num_classes"] = std::to_string(data.num_classes);
  kv["data.channels"] = std::to_string(data.channels);
  kv["data.height"] = std::to_string(data.height);
  kv["data.width"] = std::to_string(data.width);
  kv["data.train_count"] = std::to_string(data.train_count);
  kv["data.test_count"] = std::to_string(data.test_count);
  kv["data.seed"] = std::to_string(data.seed);
  kv["data.jitter.orientation"] = format_real(data.jitter.orientation_deg);
  kv["data.jitter.position"] = format_real(data.jitter.position_px);
  kv["data.jitter.noise"] = format_real(data.jitter.noise_sigma);
  kv["data.jitter.thickness_min"] = format_real(data.jitter.thickness_min);
  kv["data.jitter.thickness_max"] = format_real(data.jitter.thickness_max);
  kv["data.jitter.brightness_min"] = format_real(data.jitter.brightness_min);
  kv["data.jitter.brightness_max"] = format_real(data.jitter.brightness_max);
  kv["data.train_images"] = data.train_images.string();
  kv["data.train_labels"] = data.train_labels.string();
  kv["data.test_images"] = data.test_images.string();
  kv["data.test_labels"] = data.test_labels.string();
  std::vector<std::string> ct, cs;
  for (const auto& p : data.cifar_train) ct.push_back(p.string());
  for (const auto& p : data.cifar_test) cs.push_back(p.string());
  kv["data.cifar_train"] = join(ct);
  kv["data.cifar_test"] = join(cs);
  kv["model.arch"] = arch;
  kv["optim.lr"] = format_real(optim.learning_rate);
  kv["optim.momentum"] = format_real(optim.momentum);
  kv["optim.weight_decay"] = format_real(optim.weight_decay);
  kv["optim.schedule"] = optim.schedule == LrSchedule::Cosine ? "cosine" : "constant";
  kv["adapt.delta"] = std::to_string(adapt.delta);
  kv["adapt.epsilon"] = std::to_string(adapt.epsilon);
  kv["adapt.strategy"] = std::string(to_string(adapt.strategy));
  kv["adapt.include_original"] = adapt.include_original_in_selection ? "true" : "false";
  kv["augment.n_ops"] = std::to_string(n_ops);
  std::vector<std::string> names;
  for (OpKind k : ops) names.emplace_back(to_string(k));
  kv["augment.ops"] = ops.empty() ? "all" : join(names);
  kv["train.epochs"] = std::to_string(epochs);
  kv["train.batch_size"] = std::to_string(batch_size);
  kv["train.seed"] = std::to_string(master_seed);
  kv["train.eval_every"] = std::to_string(eval_every);
  kv["report.wall_time"] = record_wall_time ? "true" : "false";
  kv["output.dir"] = output_dir.string();
  return kv;
}

std::uint64_t TrainerConfig::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [k, v] : to_key_values()) {
    if (k == "output.dir") continue;
    h = fnv1a_string(k, h);
    h = fnv1a_string("=", h);
    h = fnv1a_string(v, h);
    h = fnv1a_string("\n", h);
  }
  return h;
}

TrainerConfig trainer_config_from(const KeyValueConfig& cfg) {
  TrainerConfig out;
  std::vector<std::string> errors;
  const auto& table = setters();
  for (const auto& [key, entry] : cfg.entries()) {
    const auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back(entry.origin + ": unknown key '" + key + "'");
      continue;
    }
    try {
      it->second(out, entry.value);
    } catch (const ConfigError& e) {
      errors.push_back(entry.origin + ": " + key + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  out.validate();
  return out;
}

std::string default_config_text() {
  std::string out = "# uada training configuration (flat key = value)\n";
  for (const auto& [k, v] : TrainerConfig{}.to_key_values()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace uada
