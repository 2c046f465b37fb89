#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uada/augment.hpp"

namespace uada {

struct TensorShape {
  int channels = 0;
  int height = 1;
  int width = 1;

  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerType : std::uint8_t { Conv = 1, Dense = 2, ReLU = 3, MaxPool = 4, Flatten = 5 };

/// One layer descriptor. Conv uses (in, out, kernel, stride, padding); Dense uses (in, out).
struct LayerSpec {
  LayerType type = LayerType::ReLU;
  int in = 0;
  int out = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  bool trainable() const { return type == LayerType::Conv || type == LayerType::Dense; }
  std::size_t weight_count() const;
  std::size_t bias_count() const { return trainable() ? static_cast<std::size_t>(out) : 0; }
  std::size_t fan_in() const;

  static LayerSpec conv(int in, int out, int kernel, int stride = 1, int padding = -1);
  static LayerSpec dense(int in, int out);
  static LayerSpec relu() { return {LayerType::ReLU}; }
  static LayerSpec max_pool() { return {LayerType::MaxPool}; }
  static LayerSpec flatten() { return {LayerType::Flatten}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  TensorShape input;
  int num_classes = 0;
  std::vector<LayerSpec> layers;
  std::uint64_t init_seed = 0;

  /// Output shape of every layer; throws ConfigError if consecutive shapes are incompatible,
  /// there is no trainable layer, or the final output is not num_classes wide.
  std::vector<TensorShape> layer_shapes() const;

  /// flatten -> dense 128 -> ReLU -> dense C
  static ModelSpec mlp_s(TensorShape input, int num_classes, std::uint64_t seed);
  /// conv 3x3x16 -> ReLU -> maxpool -> conv 3x3x32 -> ReLU -> maxpool -> dense C
  static ModelSpec cnn_s(TensorShape input, int num_classes, std::uint64_t seed);
  /// Looks up "mlp-s" or "cnn-s"; throws ConfigError otherwise.
  static ModelSpec by_name(const std::string& arch, TensorShape input, int num_classes,
                           std::uint64_t seed);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct LayerParams {
  std::vector<float> weights;
  std::vector<float> bias;
};

/// The target network: 32-bit parameters, momentum buffers, and a forward counter.
///
/// Weight layout: dense [out][in]; conv [out][in][ky][kx].
class Model {
 public:
  Model() = default;
  /// Deterministic uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from spec.init_seed.
  explicit Model(ModelSpec spec);
  /// Wraps existing parameters (used by checkpoint loading). Momentum starts at zero.
  Model(ModelSpec spec, std::vector<LayerParams> params);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  const std::vector<TensorShape>& shapes() const { return shapes_; }

  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  std::vector<LayerParams>& momentum() { return momentum_; }
  const std::vector<LayerParams>& momentum() const { return momentum_; }

  std::size_t parameter_count() const;
  /// FNV-1a over every parameter's bytes in declaration order.
  std::uint64_t checksum() const;

  std::uint64_t forward_count() const { return forward_count_->load(); }
  void count_forward() const { forward_count_->fetch_add(1); }

 private:
  ModelSpec spec_;
  std::vector<TensorShape> shapes_;
  std::vector<LayerParams> params_;
  std::vector<LayerParams> momentum_;
  // Heap-held so the model stays movable; never shared between Model objects.
  std::unique_ptr<std::atomic<std::uint64_t>> forward_count_ =
      std::make_unique<std::atomic<std::uint64_t>>(0);
};

/// Row-major (batch x num_classes).
struct Logits {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  friend bool operator==(const Logits&, const Logits&) = default;
};

struct LayerGrad {
  std::vector<double> weights;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;

  static Gradients zeros_like(const Model& m);
  double squared_norm() const;
  bool all_finite() const;
};

enum class Reduction { Mean, Sum };

/// Pure forward pass (OpenMP over samples). Increments the model's forward counter by one.
/// Throws DomainError when the batch shape does not match the model input.
Logits forward(const Model& m, const ImageBatch& batch);

/// Softmax cross-entropy, log-sum-exp stabilised. Throws DomainError on a bad label.
double cross_entropy(const Logits& logits, std::span<const int> labels,
                     Reduction reduction = Reduction::Mean);

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

/// Gradients of mean cross-entropy with respect to every parameter. Runs its own forward
/// pass, which does not touch the forward counter.
BackwardResult backward(const Model& m, const ImageBatch& batch);

enum class LrSchedule { Constant, Cosine };

struct OptimConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  LrSchedule schedule = LrSchedule::Cosine;

  void validate() const;
};

double learning_rate_at(const OptimConfig& cfg, long step, long total_steps);

/// v <- mu*v + g + lambda*w ; w <- w - lr(step)*v. Throws TrainingError on non-finite grads.
void sgd_step(Model& m, const Gradients& grads, const OptimConfig& cfg, long step,
              long total_steps);

namespace reference {

/// Straightforward serial forward pass with the same summation order as uada::forward.
/// Kept for testing and benchmarking; does not touch the forward counter.
Logits forward(const Model& m, const ImageBatch& batch);

}  // namespace reference

}  // namespace uada
