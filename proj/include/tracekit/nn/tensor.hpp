#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tracekit/error.hpp"

namespace tracekit::nn {

struct Shape {
  int h = 0, w = 0, c = 0;
  std::size_t numel() const { return static_cast<std::size_t>(h) * w * c; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(c) + ")";
  }
};

/// Storage aligned to Eigen's widest packet so vectorised reductions take the
/// same path on every run.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense (height, width, channels) array, channels innermost.
template <class T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.numel(), fill) {}
  Tensor(Shape s, const std::vector<T>& values) : shape(s), data(values.begin(), values.end()) {
    if (data.size() != shape.numel()) throw Error("tensor data does not match shape " + shape.str());
  }

  int h() const { return shape.h; }
  int w() const { return shape.w; }
  int c() const { return shape.c; }
  std::size_t numel() const { return data.size(); }

  T& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + ch]; }
  T at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + ch]; }

  // (h*w) x c view used by the GEMM-based layers.
  Eigen::Map<RowMat<T>> mat() { return {data.data(), shape.h * shape.w, shape.c}; }
  Eigen::Map<const RowMat<T>> mat() const { return {data.data(), shape.h * shape.w, shape.c}; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

template <class T>
using Batch = std::vector<Tensor<T>>;

}  // namespace tracekit::nn
