#pragma once

#include <cstddef>
#include <span>

#include "tracekit/raster.hpp"

namespace tracekit {

enum class SsimWeighting { uniform, gaussian };

struct SsimParams {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  SsimWeighting weighting = SsimWeighting::uniform;
  double gaussian_sigma = 1.5;

  /// 11x11 Gaussian-weighted window (sigma 1.5).
  static SsimParams gaussian() { return {11, 0.01, 0.03, 255.0, SsimWeighting::gaussian, 1.5}; }
  void validate() const;
};

/// Mean squared difference on the 0..255 scale.
double mse(const GrayImage& a, const GrayImage& b);

/// Mean SSIM over every window position fully inside the image.
double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& p = {});

struct Summary {
  std::size_t n = 0;
  double mean = 0, std = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  bool operator==(const Summary&) const = default;
};

/// Population standard deviation; quartiles interpolate linearly between
/// order statistics at position q * (n - 1).
Summary summarize(std::span<const double> values);

}  // namespace tracekit
