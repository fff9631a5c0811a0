#pragma once

#include <cmath>
#include <vector>

#include "tracekit/nn/model.hpp"

namespace tracekit::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are allocated lazily in
/// the visiting order of Model::for_each_trainable.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(Model<T>& model, std::vector<LayerParams<T>>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    std::size_t slot = 0;
    model.for_each_trainable(grads, [&](Buffer<T>& p, Buffer<T>& g) {
      if (slot == m_.size()) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
      auto& m = m_[slot];
      auto& v = v_[slot];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        p[i] = static_cast<T>(p[i] - cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
      }
      ++slot;
    });
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Plain gradient descent, kept for comparison runs.
template <class T>
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(Model<T>& model, std::vector<LayerParams<T>>& grads) {
    model.for_each_trainable(grads, [&](Buffer<T>& p, Buffer<T>& g) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<T>(p[i] - lr_ * g[i]);
    });
  }

 private:
  double lr_;
};

}  // namespace tracekit::nn
