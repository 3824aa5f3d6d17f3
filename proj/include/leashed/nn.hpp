#pragma once

// Minimal feed-forward networks over a flat parameter vector: dense, valid
// 2-D convolution (stride 1), non-overlapping max-pool, ReLU, softmax output
// with mean cross-entropy loss, and backpropagation.
//
// Parameter layout is layer-major; within a layer the weights come first,
// then the biases.
//   Dense:  W[out][in], b[out]
//   Conv2D: W[filter][channel][kh][kw], b[filter]
//   MaxPool has no parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace leashed::nn {

enum class Activation { None, ReLU, Softmax };

struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  static Shape flat(std::size_t n) noexcept { return {n, 1, 1}; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Dense {
  std::size_t units = 0;
  Activation activation = Activation::ReLU;
};

struct Conv2D {
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  Activation activation = Activation::ReLU;
};

struct MaxPool {
  std::size_t window_h = 0;
  std::size_t window_w = 0;
  Activation activation = Activation::None;
};

using LayerSpec = std::variant<Dense, Conv2D, MaxPool>;

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;
};

// 784 -> Dense128 x3 (ReLU) -> Dense10 (softmax).
inline NetworkSpec mlp_spec() {
  return {Shape::flat(784),
          {Dense{128}, Dense{128}, Dense{128}, Dense{10, Activation::Softmax}}};
}

// 1x28x28 -> Conv4@3x3 -> Pool2x2 -> Conv8@3x3 -> Pool2x2 -> Dense128 -> Dense10.
// Pool layers carry a ReLU, as listed in the reference architecture table.
inline NetworkSpec cnn_spec() {
  return {Shape{1, 28, 28},
          {Conv2D{4, 3, 3}, MaxPool{2, 2, Activation::ReLU}, Conv2D{8, 3, 3},
           MaxPool{2, 2, Activation::ReLU}, Dense{128}, Dense{10, Activation::Softmax}}};
}

inline NetworkSpec tiny_spec(std::size_t inputs, std::size_t hidden = 32,
                             std::size_t classes = 10) {
  return {Shape::flat(inputs), {Dense{hidden}, Dense{classes, Activation::Softmax}}};
}

enum class LayerKind { Dense, Conv2D, MaxPool };

struct LayerLayout {
  LayerKind kind = LayerKind::Dense;
  Shape in;
  Shape out;
  Activation activation = Activation::None;
  std::size_t window_h = 0;  // kernel for Conv2D, pool window for MaxPool
  std::size_t window_w = 0;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

inline Shape pooled_shape(Shape in, std::size_t window_h, std::size_t window_w) {
  if (window_h == 0 || window_w == 0) throw std::invalid_argument("max-pool window must be >= 1");
  if (window_h > in.height || window_w > in.width) {
    throw std::invalid_argument("max-pool window " + std::to_string(window_h) + "x" +
                                std::to_string(window_w) + " larger than input " +
                                std::to_string(in.height) + "x" + std::to_string(in.width));
  }
  return {in.channels, in.height / window_h, in.width / window_w};
}

// Resolves shapes and parameter offsets. Throws std::invalid_argument when
// the layer shapes do not chain or the output layer is not a softmax Dense.
inline std::vector<LayerLayout> plan(const NetworkSpec& spec) {
  if (spec.input.size() == 0) throw std::invalid_argument("network input is empty");
  if (spec.layers.empty()) throw std::invalid_argument("network has no layers");

  std::vector<LayerLayout> out;
  Shape cur = spec.input;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const bool last = i + 1 == spec.layers.size();
    LayerLayout l;
    l.in = cur;
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, Dense>) {
            if (layer.units == 0) throw std::invalid_argument("Dense layer with zero units");
            l.kind = LayerKind::Dense;
            l.out = Shape::flat(layer.units);
            l.activation = layer.activation;
            l.weight_count = layer.units * cur.size();
            l.bias_count = layer.units;
          } else if constexpr (std::is_same_v<T, Conv2D>) {
            if (layer.filters == 0 || layer.kernel_h == 0 || layer.kernel_w == 0) {
              throw std::invalid_argument("Conv2D layer with zero filters or kernel");
            }
            if (layer.kernel_h > cur.height || layer.kernel_w > cur.width) {
              throw std::invalid_argument("Conv2D kernel larger than its input");
            }
            l.kind = LayerKind::Conv2D;
            l.out = {layer.filters, cur.height - layer.kernel_h + 1, cur.width - layer.kernel_w + 1};
            l.activation = layer.activation;
            l.window_h = layer.kernel_h;
            l.window_w = layer.kernel_w;
            l.weight_count = layer.filters * cur.channels * layer.kernel_h * layer.kernel_w;
            l.bias_count = layer.filters;
          } else {
            l.kind = LayerKind::MaxPool;
            l.out = pooled_shape(cur, layer.window_h, layer.window_w);
            l.activation = layer.activation;
            l.window_h = layer.window_h;
            l.window_w = layer.window_w;
          }
        },
        spec.layers[i]);
    if (l.activation == Activation::Softmax && !last) {
      throw std::invalid_argument("softmax is only allowed on the output layer");
    }
    if (last && (l.kind != LayerKind::Dense || l.activation != Activation::Softmax)) {
      throw std::invalid_argument("the output layer must be Dense with softmax");
    }
    l.weight_offset = offset;
    l.bias_offset = offset + l.weight_count;
    offset = l.bias_offset + l.bias_count;
    cur = l.out;
    out.push_back(l);
  }
  return out;
}

inline std::size_t param_count(const NetworkSpec& spec) {
  const auto layers = plan(spec);
  return layers.back().bias_offset + layers.back().bias_count;
}

// Numerically stable softmax (max subtracted before exponentiation).
template <typename T>
void softmax(std::span<const T> logits, std::span<T> out) {
  const T mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp(static_cast<double>(logits[i] - mx));
    out[i] = static_cast<T>(e);
    sum += e;
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(out[i]) / sum);
  }
}

// Non-overlapping max-pool, stride = window, trailing remainder dropped.
// argmax receives the flat input index each output was taken from.
template <typename T>
void maxpool_forward(std::span<const T> in, Shape in_shape, std::size_t window_h,
                     std::size_t window_w, std::span<T> out, std::span<std::uint32_t> argmax) {
  const Shape o = pooled_shape(in_shape, window_h, window_w);
  for (std::size_t c = 0; c < o.channels; ++c) {
    for (std::size_t y = 0; y < o.height; ++y) {
      for (std::size_t x = 0; x < o.width; ++x) {
        std::size_t best = (c * in_shape.height + y * window_h) * in_shape.width + x * window_w;
        for (std::size_t dy = 0; dy < window_h; ++dy) {
          for (std::size_t dx = 0; dx < window_w; ++dx) {
            const std::size_t idx =
                (c * in_shape.height + y * window_h + dy) * in_shape.width + x * window_w + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t oi = (c * o.height + y) * o.width + x;
        out[oi] = in[best];
        argmax[oi] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

// Routes each output gradient to its argmax input position; grad_in is
// overwritten.
template <typename T>
void maxpool_backward(std::span<const T> grad_out, std::span<const std::uint32_t> argmax,
                      std::span<T> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), T{0});
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax[i]] += grad_out[i];
}

// Non-owning batch: `rows` consecutive inputs of the network's input size.
struct BatchView {
  std::span<const float> inputs;
  std::span<const std::uint8_t> labels;

  std::size_t rows() const noexcept { return labels.size(); }
};

template <typename T>
struct ForwardResult {
  std::vector<std::vector<T>> activations;  // per layer, rows x layer output size
  std::vector<T> probabilities;             // rows x classes
};

template <typename T>
class Network {
 public:
  // Per-thread scratch space. One workspace must not be shared by
  // concurrent calls.
  struct Workspace {
    std::vector<T> input;
    std::vector<std::vector<T>> pre;   // pre-activation per layer
    std::vector<std::vector<T>> post;  // post-activation per layer
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<std::vector<double>> delta;  // dLoss/d(pre-activation)
    std::vector<double> back;                // dLoss/d(layer input), reused
    std::vector<double> grad;                // batch gradient accumulator, length d
  };

  explicit Network(NetworkSpec spec)
      : spec_(std::move(spec)), layers_(plan(spec_)),
        dim_(layers_.back().bias_offset + layers_.back().bias_count) {}

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerLayout>& layers() const noexcept { return layers_; }
  std::size_t param_count() const noexcept { return dim_; }
  std::size_t input_size() const noexcept { return spec_.input.size(); }
  std::size_t classes() const noexcept { return layers_.back().out.size(); }

  Workspace make_workspace() const {
    Workspace ws;
    ws.input.resize(input_size());
    std::size_t widest = input_size();
    for (const auto& l : layers_) {
      ws.pre.emplace_back(l.out.size());
      ws.post.emplace_back(l.out.size());
      ws.argmax.emplace_back(l.kind == LayerKind::MaxPool ? l.out.size() : 0);
      ws.delta.emplace_back(l.out.size());
      widest = std::max(widest, l.in.size());
    }
    ws.back.resize(widest);
    ws.grad.resize(dim_);
    return ws;
  }

  // Full forward pass keeping every layer's activations.
  ForwardResult<T> forward(std::span<const T> theta, BatchView batch, Workspace& ws) const {
    check(theta, batch, /*need_labels=*/false);
    ForwardResult<T> r;
    r.activations.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      r.activations[l].reserve(batch_rows(batch) * layers_[l].out.size());
    }
    for (std::size_t row = 0; row < batch_rows(batch); ++row) {
      forward_sample(theta, batch.inputs.data() + row * input_size(), ws);
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        r.activations[l].insert(r.activations[l].end(), ws.post[l].begin(), ws.post[l].end());
      }
    }
    r.probabilities = r.activations.back();
    return r;
  }

  // Mean cross-entropy over the batch.
  double loss(std::span<const T> theta, BatchView batch, Workspace& ws) const {
    check(theta, batch, /*need_labels=*/true);
    double total = 0.0;
    for (std::size_t row = 0; row < batch.rows(); ++row) {
      forward_sample(theta, batch.inputs.data() + row * input_size(), ws);
      total += cross_entropy(ws, batch.labels[row]);
    }
    return total / static_cast<double>(batch.rows());
  }

  // Mean cross-entropy and its gradient with respect to theta. NaN/Inf are
  // propagated, not trapped.
  double loss_and_gradient(std::span<const T> theta, BatchView batch, std::span<T> grad,
                           Workspace& ws) const {
    check(theta, batch, /*need_labels=*/true);
    if (grad.size() != dim_) throw std::invalid_argument("gradient buffer has wrong length");
    std::fill(ws.grad.begin(), ws.grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t row = 0; row < batch.rows(); ++row) {
      forward_sample(theta, batch.inputs.data() + row * input_size(), ws);
      total += cross_entropy(ws, batch.labels[row]);
      backward_sample(theta, batch.labels[row], ws);
    }
    const double inv = 1.0 / static_cast<double>(batch.rows());
    for (std::size_t i = 0; i < dim_; ++i) grad[i] = static_cast<T>(ws.grad[i] * inv);
    return total * inv;
  }

 private:
  std::size_t batch_rows(BatchView batch) const noexcept {
    return batch.inputs.size() / input_size();
  }

  void check(std::span<const T> theta, BatchView batch, bool need_labels) const {
    if (theta.size() != dim_) {
      throw std::invalid_argument("theta has length " + std::to_string(theta.size()) +
                                  ", network expects " + std::to_string(dim_));
    }
    if (batch.inputs.size() % input_size() != 0) {
      throw std::invalid_argument("batch inputs are not a multiple of the input size " +
                                  std::to_string(input_size()));
    }
    if (!need_labels) return;
    if (batch.rows() == 0) throw std::invalid_argument("empty batch");
    if (batch.inputs.size() != batch.rows() * input_size()) {
      throw std::invalid_argument("batch inputs and labels disagree on row count");
    }
    for (std::uint8_t y : batch.labels) {
      if (y >= classes()) throw std::invalid_argument("label out of range");
    }
  }

  static T activate(Activation a, T z) noexcept {
    return a == Activation::ReLU ? (z > T{0} ? z : T{0}) : z;
  }

  double cross_entropy(const Workspace& ws, std::uint8_t label) const {
    // log-softmax on the logits rather than log of the rounded probability
    const auto& z = ws.pre.back();
    const double mx = static_cast<double>(*std::max_element(z.begin(), z.end()));
    double sum = 0.0;
    for (T v : z) sum += std::exp(static_cast<double>(v) - mx);
    return -(static_cast<double>(z[label]) - mx - std::log(sum));
  }

  void forward_sample(std::span<const T> theta, const float* x, Workspace& ws) const {
    for (std::size_t i = 0; i < input_size(); ++i) ws.input[i] = static_cast<T>(x[i]);
    const T* p = theta.data();
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const LayerLayout& l = layers_[li];
      const T* in = li == 0 ? ws.input.data() : ws.post[li - 1].data();
      T* z = ws.pre[li].data();
      switch (l.kind) {
        case LayerKind::Dense: {
          const std::size_t n_in = l.in.size();
          const T* w = p + l.weight_offset;
          const T* b = p + l.bias_offset;
          for (std::size_t n = 0; n < l.out.size(); ++n) {
            const T* row = w + n * n_in;
            double acc = 0.0;
            for (std::size_t i = 0; i < n_in; ++i) {
              acc += static_cast<double>(row[i]) * static_cast<double>(in[i]);
            }
            z[n] = static_cast<T>(acc + static_cast<double>(b[n]));
          }
          break;
        }
        case LayerKind::Conv2D: {
          const Shape is = l.in;
          const Shape os = l.out;
          const T* w = p + l.weight_offset;
          const T* b = p + l.bias_offset;
          for (std::size_t f = 0; f < os.channels; ++f) {
            for (std::size_t y = 0; y < os.height; ++y) {
              for (std::size_t x = 0; x < os.width; ++x) {
                double acc = static_cast<double>(b[f]);
                for (std::size_t c = 0; c < is.channels; ++c) {
                  const T* k = w + ((f * is.channels + c) * l.window_h) * l.window_w;
                  for (std::size_t ky = 0; ky < l.window_h; ++ky) {
                    const T* src = in + (c * is.height + y + ky) * is.width + x;
                    for (std::size_t kx = 0; kx < l.window_w; ++kx) {
                      acc += static_cast<double>(k[ky * l.window_w + kx]) *
                             static_cast<double>(src[kx]);
                    }
                  }
                }
                z[(f * os.height + y) * os.width + x] = static_cast<T>(acc);
              }
            }
          }
          break;
        }
        case LayerKind::MaxPool:
          maxpool_forward<T>({in, l.in.size()}, l.in, l.window_h, l.window_w,
                             {z, l.out.size()}, ws.argmax[li]);
          break;
      }
      T* a = ws.post[li].data();
      if (l.activation == Activation::Softmax) {
        softmax<T>(ws.pre[li], ws.post[li]);
      } else {
        for (std::size_t n = 0; n < l.out.size(); ++n) a[n] = activate(l.activation, z[n]);
      }
    }
  }

  // Accumulates this sample's (unscaled) gradient into ws.grad.
  void backward_sample(std::span<const T> theta, std::uint8_t label, Workspace& ws) const {
    const T* p = theta.data();
    const std::size_t last = layers_.size() - 1;
    {
      // softmax + cross-entropy: d/dz = p - onehot
      auto& d = ws.delta[last];
      const auto& prob = ws.post[last];
      for (std::size_t n = 0; n < d.size(); ++n) d[n] = static_cast<double>(prob[n]);
      d[label] -= 1.0;
    }
    for (std::size_t li = last + 1; li-- > 0;) {
      const LayerLayout& l = layers_[li];
      const T* in = li == 0 ? ws.input.data() : ws.post[li - 1].data();
      const std::vector<double>& d = ws.delta[li];
      const bool need_input_grad = li > 0;
      double* back = ws.back.data();
      if (need_input_grad) std::fill_n(back, l.in.size(), 0.0);

      switch (l.kind) {
        case LayerKind::Dense: {
          const std::size_t n_in = l.in.size();
          const T* w = p + l.weight_offset;
          double* gw = ws.grad.data() + l.weight_offset;
          double* gb = ws.grad.data() + l.bias_offset;
          for (std::size_t n = 0; n < l.out.size(); ++n) {
            const double dn = d[n];
            if (dn == 0.0) continue;
            gb[n] += dn;
            double* grow = gw + n * n_in;
            for (std::size_t i = 0; i < n_in; ++i) grow[i] += dn * static_cast<double>(in[i]);
            if (need_input_grad) {
              const T* row = w + n * n_in;
              for (std::size_t i = 0; i < n_in; ++i) back[i] += dn * static_cast<double>(row[i]);
            }
          }
          break;
        }
        case LayerKind::Conv2D: {
          const Shape is = l.in;
          const Shape os = l.out;
          const T* w = p + l.weight_offset;
          double* gw = ws.grad.data() + l.weight_offset;
          double* gb = ws.grad.data() + l.bias_offset;
          for (std::size_t f = 0; f < os.channels; ++f) {
            for (std::size_t y = 0; y < os.height; ++y) {
              for (std::size_t x = 0; x < os.width; ++x) {
                const double dn = d[(f * os.height + y) * os.width + x];
                if (dn == 0.0) continue;
                gb[f] += dn;
                for (std::size_t c = 0; c < is.channels; ++c) {
                  const std::size_t kbase = ((f * is.channels + c) * l.window_h) * l.window_w;
                  for (std::size_t ky = 0; ky < l.window_h; ++ky) {
                    const std::size_t ibase = (c * is.height + y + ky) * is.width + x;
                    for (std::size_t kx = 0; kx < l.window_w; ++kx) {
                      gw[kbase + ky * l.window_w + kx] += dn * static_cast<double>(in[ibase + kx]);
                      if (need_input_grad) {
                        back[ibase + kx] += dn * static_cast<double>(w[kbase + ky * l.window_w + kx]);
                      }
                    }
                  }
                }
              }
            }
          }
          break;
        }
        case LayerKind::MaxPool:
          if (need_input_grad) {
            const auto& am = ws.argmax[li];
            for (std::size_t i = 0; i < d.size(); ++i) back[am[i]] += d[i];
          }
          break;
      }

      if (need_input_grad) {
        // through the previous layer's activation
        const LayerLayout& prev = layers_[li - 1];
        const auto& z = ws.pre[li - 1];
        auto& dp = ws.delta[li - 1];
        for (std::size_t i = 0; i < prev.out.size(); ++i) {
          dp[i] = (prev.activation == Activation::ReLU && !(z[i] > T{0})) ? 0.0 : back[i];
        }
      }
    }
  }

  NetworkSpec spec_;
  std::vector<LayerLayout> layers_;
  std::size_t dim_;
};

// Structured view of one layer's parameters, used to check the flat layout.
template <typename T>
struct LayerParams {
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
std::vector<LayerParams<T>> gather(const std::vector<LayerLayout>& layers, std::span<const T> theta) {
  std::vector<LayerParams<T>> out;
  for (const auto& l : layers) {
    LayerParams<T> lp;
    lp.weights.assign(theta.begin() + l.weight_offset,
                      theta.begin() + l.weight_offset + l.weight_count);
    lp.bias.assign(theta.begin() + l.bias_offset, theta.begin() + l.bias_offset + l.bias_count);
    out.push_back(std::move(lp));
  }
  return out;
}

template <typename T>
std::vector<T> scatter(const std::vector<LayerLayout>& layers,
                       const std::vector<LayerParams<T>>& params) {
  const auto& back = layers.back();
  std::vector<T> theta(back.bias_offset + back.bias_count);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::copy(params[i].weights.begin(), params[i].weights.end(),
              theta.begin() + layers[i].weight_offset);
    std::copy(params[i].bias.begin(), params[i].bias.end(), theta.begin() + layers[i].bias_offset);
  }
  return theta;
}

}  // namespace leashed::nn
