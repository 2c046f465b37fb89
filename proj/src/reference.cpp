// Serial reference forward pass: plain nested loops, one output element at a time.

#include "uada/errors.hpp"
#include "uada/model.hpp"

namespace uada::reference {

Logits forward(const Model& m, const ImageBatch& batch) {
  const ModelSpec& spec = m.spec();
  if (batch.channels != spec.input.channels || batch.height != spec.input.height ||
      batch.width != spec.input.width) {
    throw DomainError("batch shape does not match model input");
  }
  const int n = batch.size();
  Logits logits{n, spec.num_classes, {}};

  for (int i = 0; i < n; ++i) {
    const auto px = batch.sample(i);
    std::vector<double> cur(px.begin(), px.end());
    TensorShape shape = spec.input;

    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      const LayerSpec& l = spec.layers[li];
      const LayerParams& p = m.params()[li];
      const TensorShape out = m.shapes()[li];
      std::vector<double> next(out.size());

      if (l.type == LayerType::Conv) {
        for (int oc = 0; oc < out.channels; ++oc) {
          for (int oy = 0; oy < out.height; ++oy) {
            for (int ox = 0; ox < out.width; ++ox) {
              double acc = 0.0;
              for (int ic = 0; ic < l.in; ++ic) {
                for (int ky = 0; ky < l.kernel; ++ky) {
                  for (int kx = 0; kx < l.kernel; ++kx) {
                    const int iy = oy * l.stride + ky - l.padding;
                    const int ix = ox * l.stride + kx - l.padding;
                    if (iy < 0 || iy >= shape.height || ix < 0 || ix >= shape.width) continue;
                    const double w =
                        p.weights[((static_cast<std::size_t>(oc) * l.in + ic) * l.kernel + ky) *
                                      l.kernel + kx];
                    acc += w * cur[(static_cast<std::size_t>(ic) * shape.height + iy) *
                                       shape.width + ix];
                  }
                }
              }
              next[(static_cast<std::size_t>(oc) * out.height + oy) * out.width + ox] =
                  acc + p.bias[static_cast<std::size_t>(oc)];
            }
          }
        }
      } else if (l.type == LayerType::Dense) {
        for (int o = 0; o < l.out; ++o) {
          double acc = 0.0;
          for (int j = 0; j < l.in; ++j) {
            acc += static_cast<double>(p.weights[static_cast<std::size_t>(o) * l.in + j]) *
                   cur[static_cast<std::size_t>(j)];
          }
          next[static_cast<std::size_t>(o)] = acc + p.bias[static_cast<std::size_t>(o)];
        }
      } else if (l.type == LayerType::ReLU) {
        for (std::size_t q = 0; q < cur.size(); ++q) next[q] = cur[q] > 0.0 ? cur[q] : 0.0;
      } else if (l.type == LayerType::MaxPool) {
        for (int c = 0; c < out.channels; ++c) {
          for (int oy = 0; oy < out.height; ++oy) {
            for (int ox = 0; ox < out.width; ++ox) {
              double best = cur[(static_cast<std::size_t>(c) * shape.height + 2 * oy) *
                                    shape.width + 2 * ox];
              for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                  const double v = cur[(static_cast<std::size_t>(c) * shape.height + 2 * oy + dy) *
                                           shape.width + 2 * ox + dx];
                  if (v > best) best = v;
                }
              }
              next[(static_cast<std::size_t>(c) * out.height + oy) * out.width + ox] = best;
            }
          }
        }
      } else {
        next = cur;
      }
      cur = std::move(next);
      shape = out;
    }
    logits.values.insert(logits.values.end(), cur.begin(), cur.end());
  }
  return logits;
}

}  // namespace uada::reference
