#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tracekit/raster.hpp"

namespace tracekit {

enum class FilterTag { sobel, canny, gaussian_highpass };
enum class FilterVariant { direct, inverse };

/// A filter and its polarity. "direct" draws bright features on a dark
/// ground; "inverse" is its photographic negative.
struct FilterKind {
  FilterTag tag = FilterTag::sobel;
  FilterVariant variant = FilterVariant::inverse;

  bool operator==(const FilterKind&) const = default;

  // Pipeline-name token: "sobel", "canny", "ghp" for inverse; "_direct" suffix otherwise.
  std::string token() const;
  static FilterKind from_token(std::string_view token);
  static std::vector<FilterKind> all();
};

struct FilterParams {
  int canny_low = 50;
  int canny_high = 150;
  double canny_sigma = 1.4;
  double highpass_sigma = 2.0;
};

/// 3x3 Sobel gradient magnitude scaled by 1/4 so a full 0|255 step maps to 255.
GrayImage sobel(const GrayImage& img);

/// Gaussian 5x5 smoothing, Sobel gradient, 4-bin non-maximum suppression and
/// 8-connected hysteresis. Output is binary 0/255 with edges at 255.
GrayImage canny(const GrayImage& img, int low, int high, double sigma = 1.4);

/// img - blur(img) + 128, clamped.
GrayImage gaussian_highpass(const GrayImage& img, double sigma);

/// Separable Gaussian with radius ceil(3 sigma) and replicate padding.
GrayImage gaussian_blur(const GrayImage& img, double sigma);
std::vector<double> gaussian_kernel_1d(double sigma, int radius);

GrayImage blend_difference(const GrayImage& a, const GrayImage& b);
GrayImage blend_grain_extract(const GrayImage& a, const GrayImage& b);

GrayImage apply(const FilterKind& kind, const GrayImage& img, const FilterParams& params = {});

}  // namespace tracekit
