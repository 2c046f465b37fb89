// OpenMP forward/backward kernels. Every output element is accumulated in a fixed
// order independent of the thread count. Results are bit-identical for any number of
// workers and match reference::forward exactly.

#include <algorithm>
#include <cmath>
#include <limits>

#include "uada/errors.hpp"
#include "uada/model.hpp"

namespace uada {

namespace {

void check_input(const Model& m, const ImageBatch& batch) {
  const TensorShape& in = m.spec().input;
  if (batch.channels != in.channels || batch.height != in.height || batch.width != in.width) {
    throw DomainError("batch shape " + std::to_string(batch.channels) + "x" +
                      std::to_string(batch.height) + "x" + std::to_string(batch.width) +
                      " does not match model input " + std::to_string(in.channels) + "x" +
                      std::to_string(in.height) + "x" + std::to_string(in.width));
  }
  if (batch.size() < 1) throw DomainError("empty batch");
}

/// Per-layer activations for the whole batch: values[l] is the input to layer l,
/// values.back() the network output. argmax[l] holds max-pool routing for pool layers.
struct Trace {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<int>> argmax;
};

void conv_forward(const LayerSpec& l, const LayerParams& p, TensorShape in, TensorShape out,
                  int n, const double* x, double* y) {
  const int k = l.kernel;
  const int s = l.stride;
  const int pad = l.padding;
  const std::size_t in_stride = in.size();
  const std::size_t out_stride = out.size();
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int oc = 0; oc < out.channels; ++oc) {
      std::vector<double> acc(static_cast<std::size_t>(out.width));
      const double* xs = x + i * in_stride;
      double* ys = y + i * out_stride + static_cast<std::size_t>(oc) * out.height * out.width;
      const float* wk = p.weights.data() + static_cast<std::size_t>(oc) * l.in * k * k;
      for (int oy = 0; oy < out.height; ++oy) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int ic = 0; ic < l.in; ++ic) {
          const double* plane = xs + static_cast<std::size_t>(ic) * in.height * in.width;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s + ky - pad;
            if (iy < 0 || iy >= in.height) continue;
            const double* row = plane + static_cast<std::size_t>(iy) * in.width;
            for (int kx = 0; kx < k; ++kx) {
              const double w = wk[(ic * k + ky) * k + kx];
              // Valid output columns: 0 <= ox*s + kx - pad < in.width.
              const int lo = std::max(0, (pad - kx + s - 1) / s);
              const int hi = std::min(out.width, (in.width + pad - kx + s - 1) / s);
              for (int ox = lo; ox < hi; ++ox) acc[ox] += w * row[ox * s + kx - pad];
            }
          }
        }
        const double b = p.bias[static_cast<std::size_t>(oc)];
        for (int ox = 0; ox < out.width; ++ox) {
          ys[static_cast<std::size_t>(oy) * out.width + ox] = acc[ox] + b;
        }
      }
    }
  }
}

void dense_forward(const LayerSpec& l, const LayerParams& p, int n, const double* x, double* y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < l.out; ++o) {
      const double* xs = x + static_cast<std::size_t>(i) * l.in;
      const float* w = p.weights.data() + static_cast<std::size_t>(o) * l.in;
      double acc = 0.0;
      for (int j = 0; j < l.in; ++j) acc += static_cast<double>(w[j]) * xs[j];
      y[static_cast<std::size_t>(i) * l.out + o] = acc + p.bias[static_cast<std::size_t>(o)];
    }
  }
}

void relu_forward(std::size_t count, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
    y[k] = x[k] > 0.0 ? x[k] : 0.0;
  }
}

void pool_forward(TensorShape in, TensorShape out, int n, const double* x, double* y, int* arg) {
  const int planes = n * in.channels;
#pragma omp parallel for schedule(static)
  for (int pi = 0; pi < planes; ++pi) {
    const double* xp = x + static_cast<std::size_t>(pi) * in.height * in.width;
    double* yp = y + static_cast<std::size_t>(pi) * out.height * out.width;
    int* ap = arg ? arg + static_cast<std::size_t>(pi) * out.height * out.width : nullptr;
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        int best = (2 * oy) * in.width + 2 * ox;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * oy + dy) * in.width + 2 * ox + dx;
            if (xp[idx] > xp[best]) best = idx;
          }
        }
        yp[oy * out.width + ox] = xp[best];
        if (ap) ap[oy * out.width + ox] = best;
      }
    }
  }
}

Trace run_forward(const Model& m, const ImageBatch& batch, bool keep_routing) {
  const ModelSpec& spec = m.spec();
  const auto& shapes = m.shapes();
  const int n = batch.size();

  Trace t;
  t.values.resize(spec.layers.size() + 1);
  t.argmax.resize(spec.layers.size());
  t.values[0].assign(batch.data.begin(), batch.data.end());

  TensorShape cur = spec.input;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    const TensorShape next = shapes[li];
    const double* x = t.values[li].data();
    auto& yv = t.values[li + 1];
    yv.resize(static_cast<std::size_t>(n) * next.size());
    switch (l.type) {
      case LayerType::Conv:
        conv_forward(l, m.params()[li], cur, next, n, x, yv.data());
        break;
      case LayerType::Dense:
        dense_forward(l, m.params()[li], n, x, yv.data());
        break;
      case LayerType::ReLU:
        relu_forward(yv.size(), x, yv.data());
        break;
      case LayerType::MaxPool:
        if (keep_routing) t.argmax[li].resize(yv.size());
        pool_forward(cur, next, n, x, yv.data(), keep_routing ? t.argmax[li].data() : nullptr);
        break;
      case LayerType::Flatten:
        std::copy(t.values[li].begin(), t.values[li].end(), yv.begin());
        break;
    }
    if (!keep_routing && li > 0) {
      std::vector<double>().swap(t.values[li]);
    }
    cur = next;
  }
  return t;
}

Logits to_logits(std::vector<double> out, int n, int classes) {
  return Logits{n, classes, std::move(out)};
}

void conv_backward(const LayerSpec& l, const LayerParams& p, TensorShape in, TensorShape out,
                   int n, const double* x, const double* dy, LayerGrad& g, double* dx) {
  const int k = l.kernel;
  const int s = l.stride;
  const int pad = l.padding;
  const std::size_t in_stride = in.size();
  const std::size_t out_stride = out.size();
  const std::size_t out_plane = static_cast<std::size_t>(out.height) * out.width;

  // Weight and bias gradients: one thread per output channel, samples summed in order.
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < out.channels; ++oc) {
    double* gw = g.weights.data() + static_cast<std::size_t>(oc) * l.in * k * k;
    double gb = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* dys = dy + i * out_stride + oc * out_plane;
      const double* xs = x + i * in_stride;
      for (std::size_t q = 0; q < out_plane; ++q) gb += dys[q];
      for (int ic = 0; ic < l.in; ++ic) {
        const double* plane = xs + static_cast<std::size_t>(ic) * in.height * in.width;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            double acc = 0.0;
            for (int oy = 0; oy < out.height; ++oy) {
              const int iy = oy * s + ky - pad;
              if (iy < 0 || iy >= in.height) continue;
              const int lo = std::max(0, (pad - kx + s - 1) / s);
              const int hi = std::min(out.width, (in.width + pad - kx + s - 1) / s);
              const double* row = plane + static_cast<std::size_t>(iy) * in.width;
              const double* drow = dys + static_cast<std::size_t>(oy) * out.width;
              for (int ox = lo; ox < hi; ++ox) acc += drow[ox] * row[ox * s + kx - pad];
            }
            gw[(ic * k + ky) * k + kx] += acc;
          }
        }
      }
    }
    g.bias[static_cast<std::size_t>(oc)] = gb;
  }

  if (!dx) return;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* dxs = dx + i * in_stride;
    std::fill(dxs, dxs + in_stride, 0.0);
    for (int oc = 0; oc < out.channels; ++oc) {
      const double* dys = dy + i * out_stride + oc * out_plane;
      const float* wk = p.weights.data() + static_cast<std::size_t>(oc) * l.in * k * k;
      for (int ic = 0; ic < l.in; ++ic) {
        double* plane = dxs + static_cast<std::size_t>(ic) * in.height * in.width;
        for (int ky = 0; ky < k; ++ky) {
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * s + ky - pad;
            if (iy < 0 || iy >= in.height) continue;
            double* row = plane + static_cast<std::size_t>(iy) * in.width;
            const double* drow = dys + static_cast<std::size_t>(oy) * out.width;
            for (int kx = 0; kx < k; ++kx) {
              const double w = wk[(ic * k + ky) * k + kx];
              const int lo = std::max(0, (pad - kx + s - 1) / s);
              const int hi = std::min(out.width, (in.width + pad - kx + s - 1) / s);
              for (int ox = lo; ox < hi; ++ox) row[ox * s + kx - pad] += w * drow[ox];
            }
          }
        }
      }
    }
  }
}

void dense_backward(const LayerSpec& l, const LayerParams& p, int n, const double* x,
                    const double* dy, LayerGrad& g, double* dx) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < l.out; ++o) {
    double* gw = g.weights.data() + static_cast<std::size_t>(o) * l.in;
    double gb = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = dy[static_cast<std::size_t>(i) * l.out + o];
      gb += d;
      const double* xs = x + static_cast<std::size_t>(i) * l.in;
      for (int j = 0; j < l.in; ++j) gw[j] += d * xs[j];
    }
    g.bias[static_cast<std::size_t>(o)] = gb;
  }
  if (!dx) return;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* dxs = dx + static_cast<std::size_t>(i) * l.in;
    std::fill(dxs, dxs + l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double d = dy[static_cast<std::size_t>(i) * l.out + o];
      const float* w = p.weights.data() + static_cast<std::size_t>(o) * l.in;
      for (int j = 0; j < l.in; ++j) dxs[j] += d * static_cast<double>(w[j]);
    }
  }
}

}  // namespace

Logits forward(const Model& m, const ImageBatch& batch) {
  check_input(m, batch);
  Trace t = run_forward(m, batch, false);
  m.count_forward();
  return to_logits(std::move(t.values.back()), batch.size(), m.spec().num_classes);
}

BackwardResult backward(const Model& m, const ImageBatch& batch) {
  check_input(m, batch);
  const ModelSpec& spec = m.spec();
  const int n = batch.size();
  const int classes = spec.num_classes;

  Trace t = run_forward(m, batch, true);
  Logits logits{n, classes, t.values.back()};

  BackwardResult result;
  result.loss = cross_entropy(logits, batch.labels, Reduction::Mean);
  result.grads = Gradients::zeros_like(m);

  // d(mean CE)/d(logits) = (softmax - onehot) / n
  std::vector<double> grad(static_cast<std::size_t>(n) * classes);
  for (int i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double se = 0.0;
    for (double v : row) se += std::exp(v - mx);
    for (int c = 0; c < classes; ++c) {
      const double prob = std::exp(row[static_cast<std::size_t>(c)] - mx) / se;
      const double target = c == batch.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      grad[static_cast<std::size_t>(i) * classes + c] = (prob - target) / n;
    }
  }

  const auto& shapes = m.shapes();
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec.layers[li];
    const TensorShape in = li == 0 ? spec.input : shapes[li - 1];
    const TensorShape out = shapes[li];
    const double* x = t.values[li].data();
    const bool need_dx = li > 0;
    if (!need_dx && !l.trainable()) break;
    std::vector<double> dx(need_dx ? static_cast<std::size_t>(n) * in.size() : 0);

    switch (l.type) {
      case LayerType::Conv:
        conv_backward(l, m.params()[li], in, out, n, x, grad.data(), result.grads.layers[li],
                      need_dx ? dx.data() : nullptr);
        break;
      case LayerType::Dense:
        dense_backward(l, m.params()[li], n, x, grad.data(), result.grads.layers[li],
                       need_dx ? dx.data() : nullptr);
        break;
      case LayerType::ReLU:
        for (std::size_t q = 0; q < dx.size(); ++q) dx[q] = x[q] > 0.0 ? grad[q] : 0.0;
        break;
      case LayerType::MaxPool: {
        const std::size_t in_plane = static_cast<std::size_t>(in.height) * in.width;
        const std::size_t out_plane = static_cast<std::size_t>(out.height) * out.width;
        const auto& route = t.argmax[li];
        for (std::size_t pi = 0; pi < static_cast<std::size_t>(n) * in.channels; ++pi) {
          for (std::size_t q = 0; q < out_plane; ++q) {
            dx[pi * in_plane + static_cast<std::size_t>(route[pi * out_plane + q])] +=
                grad[pi * out_plane + q];
          }
        }
        break;
      }
      case LayerType::Flatten:
        std::copy(grad.begin(), grad.end(), dx.begin());
        break;
    }
    if (!need_dx) break;
    grad = std::move(dx);
  }
  return result;
}

}  // namespace uada
