#include <cmath>
#include <numbers>

#include "uada/errors.hpp"
#include "uada/model.hpp"
#include "uada/rng.hpp"

namespace uada {

std::size_t LayerSpec::weight_count() const {
  switch (type) {
    case LayerType::Conv:
      return static_cast<std::size_t>(out) * in * kernel * kernel;
    case LayerType::Dense:
      return static_cast<std::size_t>(out) * in;
    default:
      return 0;
  }
}

std::size_t LayerSpec::fan_in() const {
  return type == LayerType::Conv ? static_cast<std::size_t>(in) * kernel * kernel
                                 : static_cast<std::size_t>(in);
}

LayerSpec LayerSpec::conv(int in, int out, int kernel, int stride, int padding) {
  return {LayerType::Conv, in, out, kernel, stride, padding < 0 ? kernel / 2 : padding};
}

LayerSpec LayerSpec::dense(int in, int out) { return {LayerType::Dense, in, out}; }

std::vector<TensorShape> ModelSpec::layer_shapes() const {
  if (input.channels < 1 || input.height < 1 || input.width < 1) {
    throw ConfigError("model input shape has a zero dimension");
  }
  if (num_classes < 2) throw ConfigError("model needs at least two classes");

  std::vector<TensorShape> shapes;
  TensorShape cur = input;
  bool any_trainable = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.type) {
      case LayerType::Conv: {
        if (l.in != cur.channels) {
          throw ConfigError(where + "conv expects " + std::to_string(l.in) +
                            " input channels, got " + std::to_string(cur.channels));
        }
        if (l.kernel < 1 || l.stride < 1 || l.out < 1 || l.padding < 0) {
          throw ConfigError(where + "invalid conv geometry");
        }
        const int oh = (cur.height + 2 * l.padding - l.kernel) / l.stride + 1;
        const int ow = (cur.width + 2 * l.padding - l.kernel) / l.stride + 1;
        if (oh < 1 || ow < 1) throw ConfigError(where + "conv output would be empty");
        cur = {l.out, oh, ow};
        any_trainable = true;
        break;
      }
      case LayerType::Dense:
        if (static_cast<std::size_t>(l.in) != cur.size() || cur.height != 1 || cur.width != 1) {
          throw ConfigError(where + "dense expects a flat input of " + std::to_string(l.in) +
                            ", got " + std::to_string(cur.size()));
        }
        if (l.out < 1) throw ConfigError(where + "dense output width must be >= 1");
        cur = {l.out, 1, 1};
        any_trainable = true;
        break;
      case LayerType::ReLU:
        break;
      case LayerType::MaxPool:
        if (cur.height < 2 || cur.width < 2) throw ConfigError(where + "maxpool input below 2x2");
        cur = {cur.channels, cur.height / 2, cur.width / 2};
        break;
      case LayerType::Flatten:
        cur = {static_cast<int>(cur.size()), 1, 1};
        break;
    }
    shapes.push_back(cur);
  }
  if (!any_trainable) throw ConfigError("model has no trainable layer");
  if (cur != TensorShape{num_classes, 1, 1}) {
    throw ConfigError("model output is not " + std::to_string(num_classes) + " logits wide");
  }
  return shapes;
}

ModelSpec ModelSpec::mlp_s(TensorShape input, int num_classes, std::uint64_t seed) {
  const int flat = static_cast<int>(input.size());
  return {"mlp-s",
          input,
          num_classes,
          {LayerSpec::flatten(), LayerSpec::dense(flat, 128), LayerSpec::relu(),
           LayerSpec::dense(128, num_classes)},
          seed};
}

ModelSpec ModelSpec::cnn_s(TensorShape input, int num_classes, std::uint64_t seed) {
  const int pooled = (input.height / 2 / 2) * (input.width / 2 / 2);
  return {"cnn-s",
          input,
          num_classes,
          {LayerSpec::conv(input.channels, 16, 3), LayerSpec::relu(), LayerSpec::max_pool(),
           LayerSpec::conv(16, 32, 3), LayerSpec::relu(), LayerSpec::max_pool(),
           LayerSpec::flatten(), LayerSpec::dense(32 * pooled, num_classes)},
          seed};
}

ModelSpec ModelSpec::by_name(const std::string& arch, TensorShape input, int num_classes,
                             std::uint64_t seed) {
  if (arch == "mlp-s") return mlp_s(input, num_classes, seed);
  if (arch == "cnn-s") return cnn_s(input, num_classes, seed);
  throw ConfigError("unknown model architecture '" + arch + "' (expected mlp-s or cnn-s)");
}

namespace {

std::vector<LayerParams> zero_params(const ModelSpec& spec) {
  std::vector<LayerParams> out(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    out[i].weights.assign(spec.layers[i].weight_count(), 0.0f);
    out[i].bias.assign(spec.layers[i].bias_count(), 0.0f);
  }
  return out;
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)), shapes_(spec_.layer_shapes()) {
  params_ = zero_params(spec_);
  momentum_ = zero_params(spec_);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (!l.trainable()) continue;
    RngStream rng = substream(spec_.init_seed, "layer", {i});
    const double bound = std::sqrt(1.0 / static_cast<double>(l.fan_in()));
    for (float& w : params_[i].weights) w = static_cast<float>(rng.uniform(-bound, bound));
    for (float& b : params_[i].bias) b = static_cast<float>(rng.uniform(-bound, bound));
  }
}

Model::Model(ModelSpec spec, std::vector<LayerParams> params)
    : spec_(std::move(spec)), shapes_(spec_.layer_shapes()), params_(std::move(params)) {
  momentum_ = zero_params(spec_);
  if (params_.size() != spec_.layers.size()) throw ConfigError("parameter/layer count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].weights.size() != spec_.layers[i].weight_count() ||
        params_[i].bias.size() != spec_.layers[i].bias_count()) {
      throw ConfigError("parameter shape mismatch at layer " + std::to_string(i));
    }
  }
}

Model::Model(const Model& other)
    : spec_(other.spec_),
      shapes_(other.shapes_),
      params_(other.params_),
      momentum_(other.momentum_),
      forward_count_(std::make_unique<std::atomic<std::uint64_t>>(other.forward_count())) {}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    spec_ = other.spec_;
    shapes_ = other.shapes_;
    params_ = other.params_;
    momentum_ = other.momentum_;
    forward_count_ = std::make_unique<std::atomic<std::uint64_t>>(other.forward_count());
  }
  return *this;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weights.size() + p.bias.size();
  return n;
}

std::uint64_t Model::checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    h = fnv1a(p.weights.data(), p.weights.size() * sizeof(float), h);
    h = fnv1a(p.bias.data(), p.bias.size() * sizeof(float), h);
  }
  return h;
}

Gradients Gradients::zeros_like(const Model& m) {
  Gradients g;
  g.layers.resize(m.params().size());
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    g.layers[i].weights.assign(m.params()[i].weights.size(), 0.0);
    g.layers[i].bias.assign(m.params()[i].bias.size(), 0.0);
  }
  return g;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    for (double v : l.weights) s += v * v;
    for (double v : l.bias) s += v * v;
  }
  return s;
}

bool Gradients::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.weights) if (!std::isfinite(v)) return false;
    for (double v : l.bias) if (!std::isfinite(v)) return false;
  }
  return true;
}

double cross_entropy(const Logits& logits, std::span<const int> labels, Reduction reduction) {
  if (static_cast<int>(labels.size()) != logits.rows) {
    throw DomainError("label count does not match logit rows");
  }
  double total = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols) {
      throw DomainError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(logits.cols) + ")");
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    const double mx = row[arg];
    double rest = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j != arg) rest += std::exp(row[j] - mx);
    }
    total += std::log1p(rest) + (mx - row[static_cast<std::size_t>(y)]);
  }
  return reduction == Reduction::Mean ? total / logits.rows : total;
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("optim.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
}

double learning_rate_at(const OptimConfig& cfg, long step, long total_steps) {
  if (cfg.schedule == LrSchedule::Constant || total_steps <= 0) return cfg.learning_rate;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(Model& m, const Gradients& grads, const OptimConfig& cfg, long step,
              long total_steps) {
  if (!grads.all_finite()) throw TrainingError("non-finite gradient; training aborted");
  if (grads.layers.size() != m.params().size()) throw InternalError("gradient/model mismatch");
  const double lr = learning_rate_at(cfg, step, total_steps);

  auto update = [&](std::vector<float>& w, std::vector<float>& v, const std::vector<double>& g) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double vel = cfg.momentum * v[k] + g[k] + cfg.weight_decay * w[k];
      v[k] = static_cast<float>(vel);
      w[k] = static_cast<float>(w[k] - lr * vel);
    }
  };
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    update(m.params()[i].weights, m.momentum()[i].weights, grads.layers[i].weights);
    update(m.params()[i].bias, m.momentum()[i].bias, grads.layers[i].bias);
  }
}

}  // namespace uada
