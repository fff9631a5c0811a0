#pragma once

// Forward and backward kernels for the autoencoder's layer kinds. Every
// backward function returns exact gradients of a scalar loss given the
// gradient with respect to the layer output.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tracekit/nn/tensor.hpp"

namespace tracekit::nn {

/// Spatial mapping between a "position grid" and a "pixel grid": position
/// (py, px) and tap (ky, kx) touch pixel (py*stride + ky - pad_t, px*stride + kx - pad_l).
/// A convolution reads its input through this mapping; a transposed
/// convolution writes its output through it.
struct Window {
  int kh = 3, kw = 3, stride = 1, pad_t = 0, pad_l = 0;
};

/// "same" padding for a forward convolution: output = ceil(input / stride).
inline Window conv_window(Shape in, int kh, int kw, int stride) {
  const int oh = (in.h + stride - 1) / stride, ow = (in.w + stride - 1) / stride;
  const int ph = std::max((oh - 1) * stride + kh - in.h, 0);
  const int pw = std::max((ow - 1) * stride + kw - in.w, 0);
  return {kh, kw, stride, ph / 2, pw / 2};
}

/// Transposed convolution padding for output = input * stride.
inline Window conv_transpose_window(int kh, int kw, int stride) {
  return {kh, kw, stride, (kh - stride + 1) / 2, (kw - stride + 1) / 2};
}

/// Gathers a (ph*pw) x (kh*kw*c) patch matrix; taps falling outside `src` read zero.
template <class T>
RowMat<T> gather_patches(const Tensor<T>& src, int ph, int pw, const Window& win) {
  const int c = src.c();
  const int cols = win.kh * win.kw * c;
  RowMat<T> out(static_cast<Eigen::Index>(ph) * pw, cols);
  for (int py = 0; py < ph; ++py)
    for (int px = 0; px < pw; ++px) {
      T* row = out.data() + (static_cast<std::size_t>(py) * pw + px) * cols;
      for (int ky = 0; ky < win.kh; ++ky) {
        const int y = py * win.stride + ky - win.pad_t;
        for (int kx = 0; kx < win.kw; ++kx) {
          const int x = px * win.stride + kx - win.pad_l;
          T* dst = row + (ky * win.kw + kx) * c;
          if (y < 0 || x < 0 || y >= src.h() || x >= src.w()) {
            std::fill(dst, dst + c, T(0));
          } else {
            const T* s = src.data.data() + (static_cast<std::size_t>(y) * src.w() + x) * c;
            std::copy(s, s + c, dst);
          }
        }
      }
    }
  return out;
}

/// Adjoint of gather_patches: accumulates patch rows back onto a `dst_shape` tensor.
template <class T>
Tensor<T> scatter_patches(const RowMat<T>& patches, int ph, int pw, const Window& win, Shape dst_shape) {
  Tensor<T> dst(dst_shape);
  const int c = dst_shape.c;
  const int cols = win.kh * win.kw * c;
  for (int py = 0; py < ph; ++py)
    for (int px = 0; px < pw; ++px) {
      const T* row = patches.data() + (static_cast<std::size_t>(py) * pw + px) * cols;
      for (int ky = 0; ky < win.kh; ++ky) {
        const int y = py * win.stride + ky - win.pad_t;
        if (y < 0 || y >= dst_shape.h) continue;
        for (int kx = 0; kx < win.kw; ++kx) {
          const int x = px * win.stride + kx - win.pad_l;
          if (x < 0 || x >= dst_shape.w) continue;
          const T* s = row + (ky * win.kw + kx) * c;
          T* d = dst.data.data() + (static_cast<std::size_t>(y) * dst_shape.w + x) * c;
          for (int ch = 0; ch < c; ++ch) d[ch] += s[ch];
        }
      }
    }
  return dst;
}

/// Kernel bank plus bias. For conv the weights are laid out (kh, kw, in, out);
/// for transposed conv they are (in, kh, kw, out).
template <class T>
struct ConvWeights {
  int kh = 3, kw = 3, in_c = 1, out_c = 1;
  Buffer<T> weights;
  Buffer<T> bias;

  ConvWeights() = default;
  ConvWeights(int kh_, int kw_, int in_, int out_)
      : kh(kh_), kw(kw_), in_c(in_), out_c(out_),
        weights(static_cast<std::size_t>(kh_) * kw_ * in_ * out_, T(0)),
        bias(static_cast<std::size_t>(out_), T(0)) {}
};

template <class T>
struct ConvGrads {
  Tensor<T> input;
  Buffer<T> weights;
  Buffer<T> bias;
};

namespace detail {
template <class T>
void add_bias(Tensor<T>& t, std::span<const T> bias) {
  if (bias.empty()) return;
  if (static_cast<int>(bias.size()) != t.c()) throw Error("bias length does not match channels");
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), t.c());
  t.mat().rowwise() += b;
}

template <class T>
Buffer<T> column_sums(const Tensor<T>& g) {
  Buffer<T> out(g.c(), T(0));
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(out.data(), g.c()) = g.mat().colwise().sum();
  return out;
}

// Stride-1 layers run as one GEMM per kernel tap over a zero-padded copy
// whose rows are `wp` pixels wide. Shifting by a tap is then a shift of the
// flat row index; the wp - w columns past each image row collect junk that
// is never read back.
template <class T>
RowMat<T> embed(const Tensor<T>& src, int top, int left, int rows, int wp) {
  RowMat<T> out = RowMat<T>::Zero(static_cast<Eigen::Index>(rows) * wp, src.c());
  for (int y = 0; y < src.h(); ++y)
    out.middleRows(static_cast<Eigen::Index>(y + top) * wp + left, src.w()) =
        src.mat().middleRows(static_cast<Eigen::Index>(y) * src.w(), src.w());
  return out;
}

template <class T>
Tensor<T> crop(const RowMat<T>& m, int top, int left, int wp, Shape shape) {
  Tensor<T> out(shape);
  for (int y = 0; y < shape.h; ++y)
    out.mat().middleRows(static_cast<Eigen::Index>(y) * shape.w, shape.w) =
        m.middleRows(static_cast<Eigen::Index>(y + top) * wp + left, shape.w);
  return out;
}

using TapStride = Eigen::OuterStride<>;
template <class T>
using TapMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0, TapStride>;
template <class T>
using TapMapMut = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0, TapStride>;

struct TapOffset {
  Eigen::Index src = 0, dst = 0;
};

// dst[dst_off + r] += src[src_off + r] * W_tap (or W_tap^T) for r < n, summed
// over taps. Rows are processed in cache-sized chunks, taps innermost.
template <class T>
void tap_gemm(RowMat<T>& dst, const RowMat<T>& src, Eigen::Index n, const std::vector<TapOffset>& offs,
              const std::vector<TapMap<T>>& ws, bool transpose_w) {
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index r0 = 0; r0 < n; r0 += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - r0);
    for (std::size_t t = 0; t < offs.size(); ++t) {
      auto d = dst.middleRows(offs[t].dst + r0, len);
      const auto s = src.middleRows(offs[t].src + r0, len);
      if (transpose_w) d.noalias() += s * ws[t].transpose();
      else d.noalias() += s * ws[t];
    }
  }
}

// grad_tap[t] = sum_r a[a_off_t + r]^T * b[b_off_t + r], chunked like tap_gemm.
template <class T>
void tap_weight_grads(const RowMat<T>& a, const RowMat<T>& b, Eigen::Index n, const std::vector<TapOffset>& offs,
                      std::vector<TapMapMut<T>>& grads) {
  constexpr Eigen::Index kChunk = 1024;
  for (auto& g : grads) g.setZero();
  for (Eigen::Index r0 = 0; r0 < n; r0 += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - r0);
    for (std::size_t t = 0; t < offs.size(); ++t)
      grads[t].noalias() += a.middleRows(offs[t].src + r0, len).transpose() * b.middleRows(offs[t].dst + r0, len);
  }
}
}  // namespace detail

/// Same-padded cross-correlation.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const ConvWeights<T>& k, int stride = 1) {
  if (k.in_c != in.c())
    throw Error("conv2d: kernel expects " + std::to_string(k.in_c) + " channels, input has " + std::to_string(in.c()));
  const Window win = conv_window(in.shape, k.kh, k.kw, stride);
  if (stride == 1 && k.in_c >= 4) {
    const int h = in.h(), wp = in.w() + k.kw - 1;
    const Eigen::Index n = static_cast<Eigen::Index>(h) * wp;
    const RowMat<T> src = detail::embed(in, win.pad_t, win.pad_l, h + k.kh, wp);
    RowMat<T> acc = RowMat<T>::Zero(n, k.out_c);
    std::vector<detail::TapOffset> offs;
    std::vector<detail::TapMap<T>> ws;
    for (int ky = 0; ky < k.kh; ++ky)
      for (int kx = 0; kx < k.kw; ++kx) {
        const std::size_t tap = static_cast<std::size_t>(ky * k.kw + kx) * k.in_c * k.out_c;
        ws.emplace_back(k.weights.data() + tap, k.in_c, k.out_c, detail::TapStride(k.out_c));
        offs.push_back({static_cast<Eigen::Index>(ky) * wp + kx, 0});
      }
    detail::tap_gemm(acc, src, n, offs, ws, false);
    Tensor<T> out = detail::crop(acc, 0, 0, wp, Shape{h, in.w(), k.out_c});
    detail::add_bias<T>(out, k.bias);
    return out;
  }
  const int oh = (in.h() + stride - 1) / stride, ow = (in.w() + stride - 1) / stride;
  const RowMat<T> cols = gather_patches(in, oh, ow, win);
  const Eigen::Map<const RowMat<T>> w(k.weights.data(), k.kh * k.kw * k.in_c, k.out_c);
  Tensor<T> out(Shape{oh, ow, k.out_c});
  out.mat().noalias() = cols * w;
  detail::add_bias<T>(out, k.bias);
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& in, const ConvWeights<T>& k, const Tensor<T>& grad_out, int stride = 1,
                             bool want_input = true) {
  const Window win = conv_window(in.shape, k.kh, k.kw, stride);
  if (stride == 1 && k.in_c >= 4) {
    const int h = in.h(), wp = in.w() + k.kw - 1;
    const Eigen::Index n = static_cast<Eigen::Index>(h) * wp;
    const RowMat<T> src = detail::embed(in, win.pad_t, win.pad_l, h + k.kh, wp);
    const RowMat<T> go = detail::embed(grad_out, 0, 0, h, wp);
    RowMat<T> gsrc = RowMat<T>::Zero(src.rows(), k.in_c);
    ConvGrads<T> g;
    g.weights.resize(k.weights.size());
    std::vector<detail::TapOffset> offs, woffs;
    std::vector<detail::TapMap<T>> ws;
    std::vector<detail::TapMapMut<T>> gws;
    for (int ky = 0; ky < k.kh; ++ky)
      for (int kx = 0; kx < k.kw; ++kx) {
        const std::size_t tap = static_cast<std::size_t>(ky * k.kw + kx) * k.in_c * k.out_c;
        const Eigen::Index off = static_cast<Eigen::Index>(ky) * wp + kx;
        ws.emplace_back(k.weights.data() + tap, k.in_c, k.out_c, detail::TapStride(k.out_c));
        gws.emplace_back(g.weights.data() + tap, k.in_c, k.out_c, detail::TapStride(k.out_c));
        offs.push_back({0, off});
        woffs.push_back({off, 0});
      }
    detail::tap_weight_grads(src, go, n, woffs, gws);
    g.bias = detail::column_sums(grad_out);
    if (want_input) {
      detail::tap_gemm(gsrc, go, n, offs, ws, true);
      g.input = detail::crop(gsrc, win.pad_t, win.pad_l, wp, in.shape);
    }
    return g;
  }
  const int oh = grad_out.h(), ow = grad_out.w();
  const RowMat<T> cols = gather_patches(in, oh, ow, win);
  const Eigen::Map<const RowMat<T>> w(k.weights.data(), k.kh * k.kw * k.in_c, k.out_c);

  ConvGrads<T> g;
  g.weights.resize(k.weights.size());
  Eigen::Map<RowMat<T>>(g.weights.data(), w.rows(), w.cols()).noalias() = cols.transpose() * grad_out.mat();
  g.bias = detail::column_sums(grad_out);
  if (want_input) {
    const RowMat<T> gcols = grad_out.mat() * w.transpose();
    g.input = scatter_patches(gcols, oh, ow, win, in.shape);
  }
  return g;
}

/// Each input value scatters a kernel-weighted stamp onto a grid `stride` times larger.
template <class T>
Tensor<T> conv_transpose_forward(const Tensor<T>& in, const ConvWeights<T>& k, int stride = 2) {
  if (k.in_c != in.c())
    throw Error("conv_transpose: kernel expects " + std::to_string(k.in_c) + " channels, input has " +
                std::to_string(in.c()));
  const Window win = conv_transpose_window(k.kh, k.kw, stride);
  if (stride == 1) {
    const int h = in.h(), wp = in.w() + k.kw - 1;
    const Eigen::Index n = static_cast<Eigen::Index>(h) * wp;
    const RowMat<T> src = detail::embed(in, 0, 0, h, wp);
    RowMat<T> acc = RowMat<T>::Zero(static_cast<Eigen::Index>(h + k.kh) * wp, k.out_c);
    std::vector<detail::TapOffset> offs;
    std::vector<detail::TapMap<T>> ws;
    for (int ky = 0; ky < k.kh; ++ky)
      for (int kx = 0; kx < k.kw; ++kx) {
        ws.emplace_back(k.weights.data() + static_cast<std::size_t>(ky * k.kw + kx) * k.out_c, k.in_c, k.out_c,
                        detail::TapStride(k.kh * k.kw * k.out_c));
        offs.push_back({0, static_cast<Eigen::Index>(ky) * wp + kx});
      }
    detail::tap_gemm(acc, src, n, offs, ws, false);
    Tensor<T> out = detail::crop(acc, win.pad_t, win.pad_l, wp, Shape{h, in.w(), k.out_c});
    detail::add_bias<T>(out, k.bias);
    return out;
  }
  const Eigen::Map<const RowMat<T>> w(k.weights.data(), k.in_c, k.kh * k.kw * k.out_c);
  const RowMat<T> cols = in.mat() * w;
  Tensor<T> out = scatter_patches(cols, in.h(), in.w(), win, Shape{in.h() * stride, in.w() * stride, k.out_c});
  detail::add_bias<T>(out, k.bias);
  return out;
}

template <class T>
ConvGrads<T> conv_transpose_backward(const Tensor<T>& in, const ConvWeights<T>& k, const Tensor<T>& grad_out,
                                     int stride = 2, bool want_input = true) {
  const Window win = conv_transpose_window(k.kh, k.kw, stride);
  if (stride == 1) {
    const int h = in.h(), wp = in.w() + k.kw - 1;
    const Eigen::Index n = static_cast<Eigen::Index>(h) * wp;
    const RowMat<T> src = detail::embed(in, 0, 0, h, wp);
    const RowMat<T> go = detail::embed(grad_out, win.pad_t, win.pad_l, h + k.kh, wp);
    RowMat<T> gsrc = RowMat<T>::Zero(n, k.in_c);
    ConvGrads<T> g;
    g.weights.resize(k.weights.size());
    std::vector<detail::TapOffset> offs, woffs;
    std::vector<detail::TapMap<T>> ws;
    std::vector<detail::TapMapMut<T>> gws;
    for (int ky = 0; ky < k.kh; ++ky)
      for (int kx = 0; kx < k.kw; ++kx) {
        const std::size_t tap = static_cast<std::size_t>(ky * k.kw + kx) * k.out_c;
        const Eigen::Index off = static_cast<Eigen::Index>(ky) * wp + kx;
        const detail::TapStride st(k.kh * k.kw * k.out_c);
        ws.emplace_back(k.weights.data() + tap, k.in_c, k.out_c, st);
        gws.emplace_back(g.weights.data() + tap, k.in_c, k.out_c, st);
        offs.push_back({off, 0});
        woffs.push_back({0, off});
      }
    detail::tap_weight_grads(src, go, n, woffs, gws);
    g.bias = detail::column_sums(grad_out);
    if (want_input) {
      detail::tap_gemm(gsrc, go, n, offs, ws, true);
      g.input = detail::crop(gsrc, 0, 0, wp, in.shape);
    }
    return g;
  }
  const Eigen::Map<const RowMat<T>> w(k.weights.data(), k.in_c, k.kh * k.kw * k.out_c);
  const RowMat<T> gcols = gather_patches(grad_out, in.h(), in.w(), win);

  ConvGrads<T> g;
  g.weights.resize(k.weights.size());
  Eigen::Map<RowMat<T>>(g.weights.data(), w.rows(), w.cols()).noalias() = in.mat().transpose() * gcols;
  g.bias = detail::column_sums(grad_out);
  if (want_input) {
    g.input = Tensor<T>(in.shape);
    g.input.mat().noalias() = gcols * w.transpose();
  }
  return g;
}

/// 2x2 non-overlapping max pooling. `argmax` holds flat input indices.
template <class T>
std::pair<Tensor<T>, std::vector<std::uint32_t>> maxpool2_forward(const Tensor<T>& in) {
  if (in.h() % 2 != 0 || in.w() % 2 != 0) throw Error("maxpool2: odd spatial dimensions " + in.shape.str());
  const int oh = in.h() / 2, ow = in.w() / 2, c = in.c();
  Tensor<T> out(Shape{oh, ow, c});
  std::vector<std::uint32_t> argmax(out.numel());
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < c; ++ch) {
        std::uint32_t best = static_cast<std::uint32_t>((static_cast<std::size_t>(2 * y) * in.w() + 2 * x) * c + ch);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const auto idx =
                static_cast<std::uint32_t>((static_cast<std::size_t>(2 * y + dy) * in.w() + 2 * x + dx) * c + ch);
            if (in.data[idx] > in.data[best]) best = idx;
          }
        const std::size_t o = (static_cast<std::size_t>(y) * ow + x) * c + ch;
        out.data[o] = in.data[best];
        argmax[o] = best;
      }
  return {std::move(out), std::move(argmax)};
}

template <class T>
Tensor<T> maxpool2_backward(Shape in_shape, std::span<const std::uint32_t> argmax, const Tensor<T>& grad_out) {
  Tensor<T> g(in_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g.data[argmax[i]] += grad_out.data[i];
  return g;
}

template <class T>
struct BatchNormParams {
  Buffer<T> gamma, beta, running_mean, running_var;

  BatchNormParams() = default;
  explicit BatchNormParams(int channels)
      : gamma(channels, T(1)), beta(channels, T(0)), running_mean(channels, T(0)), running_var(channels, T(1)) {}
  int channels() const { return static_cast<int>(gamma.size()); }
};

enum class BnMode { train, infer };

template <class T>
struct BatchNormCache {
  Batch<T> xhat;
  Buffer<T> inv_std;
};

namespace detail {
// Column sums of f(rows) accumulated as float within row chunks and double across chunks.
template <class T, class Fn>
void chunked_column_sums(const Tensor<T>& t, std::vector<double>& acc, Fn&& f) {
  constexpr Eigen::Index kChunk = 512;
  const auto m = t.mat();
  for (Eigen::Index r0 = 0; r0 < m.rows(); r0 += kChunk) {
    const Eigen::Index len = std::min(kChunk, m.rows() - r0);
    const Eigen::Matrix<T, 1, Eigen::Dynamic> part = f(m.middleRows(r0, len), r0, len);
    for (int ch = 0; ch < t.c(); ++ch) acc[ch] += part[ch];
  }
}
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
}  // namespace detail

/// Per-channel normalisation. Train mode uses batch statistics (population
/// variance) and folds them into the running estimates with `momentum`.
template <class T>
Batch<T> batchnorm_forward(const Batch<T>& in, BatchNormParams<T>& p, T eps, BnMode mode, T momentum = T(0.9),
                           BatchNormCache<T>* cache = nullptr) {
  if (in.empty()) throw Error("batchnorm: empty batch");
  const int c = in.front().c();
  if (c != p.channels()) throw Error("batchnorm: channel mismatch");
  if (mode == BnMode::train && in.size() < 2) throw Error("batchnorm: train mode needs a batch of at least 2");

  detail::RowVec<T> mean(c), inv_std(c);
  if (mode == BnMode::train) {
    std::vector<double> s(c, 0.0), s2(c, 0.0);
    std::size_t n = 0;
    for (const auto& t : in) {
      if (t.shape != in.front().shape) throw Error("batchnorm: inconsistent shapes in batch");
      detail::chunked_column_sums(t, s, [](const auto& blk, auto, auto) { return blk.colwise().sum().eval(); });
      n += t.numel() / c;
    }
    for (int ch = 0; ch < c; ++ch) {
      s[ch] /= static_cast<double>(n);
      mean[ch] = static_cast<T>(s[ch]);
    }
    for (const auto& t : in)
      detail::chunked_column_sums(t, s2, [&](const auto& blk, auto, auto) {
        return (blk.rowwise() - mean).array().square().matrix().colwise().sum().eval();
      });
    for (int ch = 0; ch < c; ++ch) {
      const double var = s2[ch] / static_cast<double>(n);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      p.running_mean[ch] = momentum * p.running_mean[ch] + (T(1) - momentum) * static_cast<T>(s[ch]);
      p.running_var[ch] = momentum * p.running_var[ch] + (T(1) - momentum) * static_cast<T>(var);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = p.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(p.running_var[ch] + eps);
    }
  }

  const Eigen::Map<const detail::RowVec<T>> gamma(p.gamma.data(), c), beta(p.beta.data(), c);
  Batch<T> out;
  out.reserve(in.size());
  if (cache) {
    cache->xhat.clear();
    cache->inv_std.assign(inv_std.data(), inv_std.data() + c);
  }
  for (const auto& t : in) {
    Tensor<T> xhat(t.shape);
    Tensor<T> y(t.shape);
    xhat.mat().array() = (t.mat().rowwise() - mean).array().rowwise() * inv_std.array();
    y.mat().array() = (xhat.mat().array().rowwise() * gamma.array()).rowwise() + beta.array();
    if (cache) cache->xhat.push_back(std::move(xhat));
    out.push_back(std::move(y));
  }
  return out;
}

template <class T>
struct BatchNormGrads {
  Batch<T> input;
  Buffer<T> gamma, beta;
};

template <class T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const BatchNormParams<T>& p,
                                     const Batch<T>& grad_out) {
  const int c = p.channels();
  std::vector<double> dgamma(c, 0.0), dbeta(c, 0.0);
  std::size_t n = 0;
  for (std::size_t s = 0; s < grad_out.size(); ++s) {
    const auto& g = grad_out[s];
    const auto xh = cache.xhat[s].mat();
    detail::chunked_column_sums(g, dbeta, [](const auto& blk, auto, auto) { return blk.colwise().sum().eval(); });
    detail::chunked_column_sums(g, dgamma, [&](const auto& blk, auto r0, auto len) {
      return blk.cwiseProduct(xh.middleRows(r0, len)).colwise().sum().eval();
    });
    n += g.numel() / c;
  }
  BatchNormGrads<T> out;
  out.gamma.resize(c);
  out.beta.resize(c);
  detail::RowVec<T> scale(c), db(c), dg(c);
  for (int ch = 0; ch < c; ++ch) {
    out.gamma[ch] = dg[ch] = static_cast<T>(dgamma[ch]);
    out.beta[ch] = db[ch] = static_cast<T>(dbeta[ch]);
    scale[ch] = p.gamma[ch] * cache.inv_std[ch] / static_cast<T>(n);
  }
  const T nn = static_cast<T>(n);
  for (std::size_t s = 0; s < grad_out.size(); ++s) {
    const auto& g = grad_out[s];
    const auto xh = cache.xhat[s].mat();
    Tensor<T> gi(g.shape);
    gi.mat().array() =
        (((g.mat() * nn).rowwise() - db).array() - xh.array().rowwise() * dg.array()).rowwise() * scale.array();
    out.input.push_back(std::move(gi));
  }
  return out;
}

enum class Activation { none, relu, sigmoid };

template <class T>
void activation_forward_inplace(Tensor<T>& t, Activation act) {
  auto a = t.mat().array();
  switch (act) {
    case Activation::none: break;
    case Activation::relu: a = a.max(T(0)); break;
    case Activation::sigmoid:
      for (auto& v : t.data) v = T(1) / (T(1) + std::exp(-v));
      break;
  }
}

template <class T>
Tensor<T> activation_forward(const Tensor<T>& in, Activation act) {
  Tensor<T> out = in;
  activation_forward_inplace(out, act);
  return out;
}

/// Gradient through an activation, expressed in terms of its output.
template <class T>
void activation_backward_inplace(const Tensor<T>& out, Tensor<T>& grad, Activation act) {
  switch (act) {
    case Activation::none: break;
    case Activation::relu:
      grad.mat().array() = (out.mat().array() > T(0)).select(grad.mat().array(), T(0));
      break;
    case Activation::sigmoid:
      grad.mat().array() *= out.mat().array() * (T(1) - out.mat().array());
      break;
  }
}

template <class T>
Tensor<T> activation_backward(const Tensor<T>& out, const Tensor<T>& grad_out, Activation act) {
  Tensor<T> g = grad_out;
  activation_backward_inplace(out, g, act);
  return g;
}

/// Mean squared difference over every element.
template <class T>
double loss_mse(const Tensor<T>& out, const Tensor<T>& target) {
  if (out.shape != target.shape) throw Error("loss_mse: shape mismatch " + out.shape.str() + " vs " + target.shape.str());
  double s = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double d = static_cast<double>(out.data[i]) - target.data[i];
    s += d * d;
  }
  return s / static_cast<double>(out.numel());
}

/// Batch loss (mean over all elements of all samples) and its gradient.
template <class T>
double loss_mse(const Batch<T>& out, const Batch<T>& target, Batch<T>* grad = nullptr) {
  if (out.size() != target.size() || out.empty()) throw Error("loss_mse: batch size mismatch");
  std::size_t n = 0;
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (out[s].shape != target[s].shape) throw Error("loss_mse: shape mismatch");
    n += out[s].numel();
  }
  double total = 0;
  if (grad) grad->clear();
  for (std::size_t s = 0; s < out.size(); ++s) {
    Tensor<T> g(out[s].shape);
    for (std::size_t i = 0; i < out[s].numel(); ++i) {
      const double d = static_cast<double>(out[s].data[i]) - target[s].data[i];
      total += d * d;
      g.data[i] = static_cast<T>(2.0 * d / static_cast<double>(n));
    }
    if (grad) grad->push_back(std::move(g));
  }
  return total / static_cast<double>(n);
}

}  // namespace tracekit::nn
