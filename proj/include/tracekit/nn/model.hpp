#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tracekit/nn/layers.hpp"

namespace tracekit::nn {

enum class LayerKind : std::uint8_t { conv = 0, maxpool2 = 1, conv_transpose = 2, batchnorm = 3, activation = 4 };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int kh = 0, kw = 0, in_c = 0, out_c = 0;
  int stride = 1;
  Activation act = Activation::none;

  static LayerSpec conv(int k, int in, int out) { return {LayerKind::conv, k, k, in, out, 1, Activation::none}; }
  static LayerSpec conv_transpose(int k, int in, int out, int stride) {
    return {LayerKind::conv_transpose, k, k, in, out, stride, Activation::none};
  }
  static LayerSpec maxpool() { return {LayerKind::maxpool2, 2, 2, 0, 0, 2, Activation::none}; }
  static LayerSpec batchnorm(int c) { return {LayerKind::batchnorm, 0, 0, c, c, 1, Activation::none}; }
  static LayerSpec activation(Activation a) { return {LayerKind::activation, 0, 0, 0, 0, 1, a}; }

  bool operator==(const LayerSpec&) const = default;
};

/// Trainable parameters of one layer; unused fields stay empty.
template <class T>
struct LayerParams {
  Buffer<T> weights, bias, gamma, beta, running_mean, running_var;
  bool operator==(const LayerParams&) const = default;
};

struct Architecture {
  std::vector<LayerSpec> layers;
  Shape input;
  int bottleneck_layer = -1;  // output of this layer is the bottleneck code
  bool operator==(const Architecture&) const = default;
};

/// Encoder: conv16-pool, conv8-pool, conv8-pool, conv4 (256 -> 128 -> 64 -> 32).
/// Decoder: transposed convs 4, 8, 16 at stride 2, a stride-1 transposed conv
/// with 16 kernels, each followed by batch norm; a final 1-kernel conv with
/// sigmoid output.
inline Architecture standard_architecture(int side = 256) {
  using A = Activation;
  Architecture a;
  a.input = {side, side, 1};
  auto& L = a.layers;
  L.push_back(LayerSpec::conv(3, 1, 16));
  L.push_back(LayerSpec::activation(A::relu));
  L.push_back(LayerSpec::maxpool());
  L.push_back(LayerSpec::conv(3, 16, 8));
  L.push_back(LayerSpec::activation(A::relu));
  L.push_back(LayerSpec::maxpool());
  L.push_back(LayerSpec::conv(3, 8, 8));
  L.push_back(LayerSpec::activation(A::relu));
  L.push_back(LayerSpec::maxpool());
  L.push_back(LayerSpec::conv(3, 8, 4));
  L.push_back(LayerSpec::activation(A::relu));
  a.bottleneck_layer = static_cast<int>(L.size()) - 1;
  const int dec[][3] = {{4, 4, 2}, {4, 8, 2}, {8, 16, 2}, {16, 16, 1}};
  for (const auto& d : dec) {
    L.push_back(LayerSpec::conv_transpose(3, d[0], d[1], d[2]));
    L.push_back(LayerSpec::batchnorm(d[1]));
    L.push_back(LayerSpec::activation(A::relu));
  }
  L.push_back(LayerSpec::conv(3, 16, 1));
  L.push_back(LayerSpec::activation(A::sigmoid));
  return a;
}

/// Shape after each layer (element 0 is the input shape).
inline std::vector<Shape> shape_trace(const Architecture& arch) {
  std::vector<Shape> trace{arch.input};
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    Shape s = trace.back();
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::conv:
        if (l.in_c != s.c) throw Error(where + "conv expects " + std::to_string(l.in_c) + " channels, got " + s.str());
        s = {(s.h + l.stride - 1) / l.stride, (s.w + l.stride - 1) / l.stride, l.out_c};
        break;
      case LayerKind::conv_transpose:
        if (l.in_c != s.c) throw Error(where + "conv_transpose expects " + std::to_string(l.in_c) + " channels");
        s = {s.h * l.stride, s.w * l.stride, l.out_c};
        break;
      case LayerKind::maxpool2:
        if (s.h % 2 || s.w % 2) throw Error(where + "maxpool on odd size " + s.str());
        s = {s.h / 2, s.w / 2, s.c};
        break;
      case LayerKind::batchnorm:
        if (l.in_c != s.c) throw Error(where + "batchnorm channel mismatch");
        break;
      case LayerKind::activation: break;
    }
    trace.push_back(s);
  }
  return trace;
}

template <class T>
class Model {
 public:
  static constexpr T kBnEps = T(1e-3);
  static constexpr T kBnMomentum = T(0.9);

  Model() = default;

  /// Glorot-uniform kernels from a seeded generator; zero biases, unit BN scale.
  Model(Architecture arch, std::uint64_t seed) : arch_(std::move(arch)) {
    shape_trace(arch_);
    std::mt19937_64 rng(seed);
    params_.resize(arch_.layers.size());
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const auto& l = arch_.layers[i];
      auto& p = params_[i];
      if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_transpose) {
        const double fan_in = static_cast<double>(l.kh) * l.kw * l.in_c;
        const double fan_out = static_cast<double>(l.kh) * l.kw * l.out_c;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        p.weights.resize(static_cast<std::size_t>(l.kh) * l.kw * l.in_c * l.out_c);
        for (auto& w : p.weights) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
          w = static_cast<T>((2.0 * u - 1.0) * limit);
        }
        p.bias.assign(l.out_c, T(0));
      } else if (l.kind == LayerKind::batchnorm) {
        p.gamma.assign(l.in_c, T(1));
        p.beta.assign(l.in_c, T(0));
        p.running_mean.assign(l.in_c, T(0));
        p.running_var.assign(l.in_c, T(1));
      }
    }
  }

  Model(Architecture arch, std::vector<LayerParams<T>> params) : arch_(std::move(arch)), params_(std::move(params)) {
    shape_trace(arch_);
    if (params_.size() != arch_.layers.size()) throw Error("parameter table does not match layer table");
    for (std::size_t i = 0; i < params_.size(); ++i) check_param_shapes(i);
  }

  const Architecture& architecture() const { return arch_; }
  const std::vector<LayerSpec>& layers() const { return arch_.layers; }
  std::vector<LayerParams<T>>& params() { return params_; }
  const std::vector<LayerParams<T>>& params() const { return params_; }

  bool operator==(const Model&) const = default;

  /// Cached activations of a training-mode forward pass.
  struct Cache {
    std::vector<Batch<T>> acts;  // acts[i] = input of layer i; acts.back() = network output
    std::vector<std::vector<std::vector<std::uint32_t>>> argmax;
    std::vector<Shape> shapes;  // input shape of each layer
    std::vector<BatchNormCache<T>> bn;
  };

  /// Inference pass (batch norm uses running statistics). If `bottleneck`
  /// is given it receives the encoder output.
  Tensor<T> infer(const Tensor<T>& input, Tensor<T>* bottleneck = nullptr) const {
    if (input.shape != arch_.input) throw Error("model expects input " + arch_.input.str() + ", got " + input.shape.str());
    Tensor<T> x = input;
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const auto& l = arch_.layers[i];
      const auto& p = params_[i];
      switch (l.kind) {
        case LayerKind::conv: x = conv2d_forward(x, conv_weights(i), l.stride); break;
        case LayerKind::conv_transpose: x = conv_transpose_forward(x, conv_weights(i), l.stride); break;
        case LayerKind::maxpool2: x = maxpool2_forward(x).first; break;
        case LayerKind::activation: x = activation_forward(x, l.act); break;
        case LayerKind::batchnorm: {
          BatchNormParams<T> bp;
          bp.gamma = p.gamma;
          bp.beta = p.beta;
          bp.running_mean = p.running_mean;
          bp.running_var = p.running_var;
          Batch<T> one{std::move(x)};
          x = std::move(batchnorm_forward(one, bp, kBnEps, BnMode::infer)[0]);
          break;
        }
      }
      if (bottleneck && static_cast<int>(i) == arch_.bottleneck_layer) *bottleneck = x;
    }
    return x;
  }

  /// Training-mode pass over a batch. Updates batch-norm running statistics.
  Batch<T> forward_train(const Batch<T>& input, Cache& cache) {
    for (const auto& t : input)
      if (t.shape != arch_.input) throw Error("model expects input " + arch_.input.str() + ", got " + t.shape.str());
    const std::size_t L = arch_.layers.size();
    cache.acts.assign(L + 1, {});
    cache.argmax.assign(L, {});
    cache.bn.assign(L, {});
    cache.shapes = shape_trace(arch_);
    cache.acts[0] = input;
    // acts[i] is left empty when layer i is an activation (its input is overwritten in place).
    for (std::size_t i = 0; i < L; ++i) {
      const auto& l = arch_.layers[i];
      Batch<T>& in = cache.acts[i];
      Batch<T> out;
      out.reserve(in.size());
      switch (l.kind) {
        case LayerKind::conv:
          for (const auto& x : in) out.push_back(conv2d_forward(x, conv_weights(i), l.stride));
          break;
        case LayerKind::conv_transpose:
          for (const auto& x : in) out.push_back(conv_transpose_forward(x, conv_weights(i), l.stride));
          break;
        case LayerKind::maxpool2:
          for (const auto& x : in) {
            auto [y, am] = maxpool2_forward(x);
            out.push_back(std::move(y));
            cache.argmax[i].push_back(std::move(am));
          }
          break;
        case LayerKind::activation:
          // The pre-activation values are not needed for backprop; reuse their storage.
          out = std::move(cache.acts[i]);
          for (auto& x : out) activation_forward_inplace(x, l.act);
          break;
        case LayerKind::batchnorm: {
          auto& p = params_[i];
          BatchNormParams<T> bp;
          bp.gamma = p.gamma;
          bp.beta = p.beta;
          bp.running_mean = p.running_mean;
          bp.running_var = p.running_var;
          out = batchnorm_forward(in, bp, kBnEps, BnMode::train, kBnMomentum, &cache.bn[i]);
          p.running_mean = bp.running_mean;
          p.running_var = bp.running_var;
          break;
        }
      }
      cache.acts[i + 1] = std::move(out);
    }
    return cache.acts.back();
  }

  struct Gradients {
    std::vector<LayerParams<T>> params;  // weights/bias/gamma/beta, summed over the batch
    Batch<T> input;
  };

  /// Backpropagates `grad_out` (d loss / d network output) through a cached pass.
  /// The input gradient is only produced when `want_input_grad` is set.
  Gradients backward(const Cache& cache, Batch<T> grad, bool want_input_grad = false) const {
    const std::size_t L = arch_.layers.size();
    if (cache.acts.size() != L + 1) throw Error("backward: forward pass not cached");
    Gradients g;
    g.params.resize(L);
    for (std::size_t ii = L; ii-- > 0;) {
      const auto& l = arch_.layers[ii];
      const Batch<T>& in = cache.acts[ii];
      const Batch<T>& out = cache.acts[ii + 1];
      Batch<T> next;
      next.reserve(grad.size());
      switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::conv_transpose: {
          const ConvWeights<T> k = conv_weights(ii);
          auto& gp = g.params[ii];
          gp.weights.assign(k.weights.size(), T(0));
          gp.bias.assign(k.bias.size(), T(0));
          for (std::size_t s = 0; s < grad.size(); ++s) {
            const bool want = ii > 0 || want_input_grad;
            ConvGrads<T> cg = l.kind == LayerKind::conv ? conv2d_backward(in[s], k, grad[s], l.stride, want)
                                                        : conv_transpose_backward(in[s], k, grad[s], l.stride, want);
            for (std::size_t j = 0; j < cg.weights.size(); ++j) gp.weights[j] += cg.weights[j];
            for (std::size_t j = 0; j < cg.bias.size(); ++j) gp.bias[j] += cg.bias[j];
            next.push_back(std::move(cg.input));
          }
          break;
        }
        case LayerKind::maxpool2:
          for (std::size_t s = 0; s < grad.size(); ++s)
            next.push_back(maxpool2_backward(cache.shapes[ii], cache.argmax[ii][s], grad[s]));
          break;
        case LayerKind::activation:
          for (std::size_t s = 0; s < grad.size(); ++s) activation_backward_inplace(out[s], grad[s], l.act);
          next = std::move(grad);
          break;
        case LayerKind::batchnorm: {
          BatchNormParams<T> bp;
          bp.gamma = params_[ii].gamma;
          bp.beta = params_[ii].beta;
          bp.running_mean = params_[ii].running_mean;
          bp.running_var = params_[ii].running_var;
          auto bg = batchnorm_backward(cache.bn[ii], bp, grad);
          g.params[ii].gamma = std::move(bg.gamma);
          g.params[ii].beta = std::move(bg.beta);
          next = std::move(bg.input);
          break;
        }
      }
      grad = std::move(next);
    }
    if (want_input_grad) g.input = std::move(grad);
    return g;
  }

  ConvWeights<T> conv_weights(std::size_t i) const {
    const auto& l = arch_.layers[i];
    ConvWeights<T> k;
    k.kh = l.kh;
    k.kw = l.kw;
    k.in_c = l.in_c;
    k.out_c = l.out_c;
    k.weights = params_[i].weights;
    k.bias = params_[i].bias;
    return k;
  }

  /// Visits each trainable vector together with its gradient counterpart.
  template <class Fn>
  void for_each_trainable(std::vector<LayerParams<T>>& grads, Fn&& fn) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      auto& g = grads[i];
      if (!p.weights.empty()) fn(p.weights, g.weights);
      if (!p.bias.empty()) fn(p.bias, g.bias);
      if (!p.gamma.empty()) fn(p.gamma, g.gamma);
      if (!p.beta.empty()) fn(p.beta, g.beta);
    }
  }

  template <class U>
  Model<U> cast() const {
    std::vector<LayerParams<U>> ps(params_.size());
    const auto conv = [](const Buffer<T>& v) { return Buffer<U>(v.begin(), v.end()); };
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ps[i].weights = conv(params_[i].weights);
      ps[i].bias = conv(params_[i].bias);
      ps[i].gamma = conv(params_[i].gamma);
      ps[i].beta = conv(params_[i].beta);
      ps[i].running_mean = conv(params_[i].running_mean);
      ps[i].running_var = conv(params_[i].running_var);
    }
    return Model<U>(arch_, std::move(ps));
  }

 private:
  void check_param_shapes(std::size_t i) const {
    const auto& l = arch_.layers[i];
    const auto& p = params_[i];
    const auto fail = [&] { throw Error("layer " + std::to_string(i) + ": parameter shapes do not match the layer table"); };
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_transpose) {
      if (p.weights.size() != static_cast<std::size_t>(l.kh) * l.kw * l.in_c * l.out_c) fail();
      if (p.bias.size() != static_cast<std::size_t>(l.out_c)) fail();
    } else if (l.kind == LayerKind::batchnorm) {
      const auto c = static_cast<std::size_t>(l.in_c);
      if (p.gamma.size() != c || p.beta.size() != c || p.running_mean.size() != c || p.running_var.size() != c) fail();
    } else if (!p.weights.empty() || !p.bias.empty() || !p.gamma.empty()) {
      fail();
    }
  }

  Architecture arch_;
  std::vector<LayerParams<T>> params_;
};

}  // namespace tracekit::nn
