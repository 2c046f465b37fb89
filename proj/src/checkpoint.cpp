#include "uada/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "uada/errors.hpp"
#include "uada/report.hpp"
#include "uada/rng.hpp"

namespace uada {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<char>(u & 0xFF));
      u = static_cast<U>(u >> 8);
    }
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_bytes(const char* p, std::size_t n) { bytes_.append(p, n); }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::string file)
      : bytes_(bytes), end_(end), file_(std::move(file)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) {
      throw FormatError(file_ + ": truncated checkpoint at offset " + std::to_string(pos_));
    }
  }
  const std::string& bytes_;
  std::size_t end_;
  std::string file_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  const ModelSpec& spec = m.spec();
  w.put(static_cast<std::uint32_t>(spec.name.size()));
  w.put_bytes(spec.name.data(), spec.name.size());
  w.put(static_cast<std::int32_t>(spec.input.channels));
  w.put(static_cast<std::int32_t>(spec.input.height));
  w.put(static_cast<std::int32_t>(spec.input.width));
  w.put(static_cast<std::int32_t>(spec.num_classes));
  w.put(spec.init_seed);
  w.put(static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    w.put(static_cast<std::uint8_t>(l.type));
    for (int v : {l.in, l.out, l.kernel, l.stride, l.padding}) w.put(static_cast<std::int32_t>(v));
  }
  for (const LayerParams& p : m.params()) {
    for (float f : p.weights) w.put_f32(f);
    for (float f : p.bias) w.put_f32(f);
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.put(sum);
  write_file_atomic(path, w.bytes());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string file = path.string();
  if (bytes.size() < sizeof(kCheckpointMagic) + 4 + 8) {
    throw FormatError(file + ": too short to be a checkpoint");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError(file + ": bad checkpoint magic at offset 0");
  }
  const std::size_t body = bytes.size() - 8;
  Reader r(bytes, body, file);
  r.get_string(sizeof(kCheckpointMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError(file + ": checkpoint version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Reader tail(bytes, bytes.size(), file);
  tail.get_string(body);
  const auto stored = tail.get<std::uint64_t>();
  if (stored != fnv1a(bytes.data(), body)) {
    throw FormatError(file + ": checkpoint checksum mismatch");
  }

  ModelSpec spec;
  spec.name = r.get_string(r.get<std::uint32_t>());
  spec.input.channels = r.get<std::int32_t>();
  spec.input.height = r.get<std::int32_t>();
  spec.input.width = r.get<std::int32_t>();
  spec.num_classes = r.get<std::int32_t>();
  spec.init_seed = r.get<std::uint64_t>();
  const auto n_layers = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const auto type = r.get<std::uint8_t>();
    if (type < 1 || type > 5) throw FormatError(file + ": unknown layer type " + std::to_string(type));
    l.type = static_cast<LayerType>(type);
    l.in = r.get<std::int32_t>();
    l.out = r.get<std::int32_t>();
    l.kernel = r.get<std::int32_t>();
    l.stride = r.get<std::int32_t>();
    l.padding = r.get<std::int32_t>();
    spec.layers.push_back(l);
  }
  std::vector<LayerParams> params(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    params[i].weights.resize(spec.layers[i].weight_count());
    params[i].bias.resize(spec.layers[i].bias_count());
    for (float& f : params[i].weights) f = r.get_f32();
    for (float& f : params[i].bias) f = r.get_f32();
  }
  if (r.pos() != body) throw FormatError(file + ": trailing bytes before checksum");
  try {
    return Model(std::move(spec), std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(file + ": " + e.what());
  }
}

}  // namespace uada
