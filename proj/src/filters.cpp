#include "tracekit/filters.hpp"

#include <algorithm>
#include <cmath>

namespace tracekit {

namespace {

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void require_same_size(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw Error("image size mismatch");
}

// Float plane with the same geometry as a GrayImage.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
  double clamped(int x, int y) const {
    return at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  }
};

Plane to_plane(const GrayImage& img) {
  Plane p(img.width(), img.height());
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = img.pixels()[i];
  return p;
}

Plane blur_plane(const Plane& src, double sigma, int radius) {
  const auto k = gaussian_kernel_1d(sigma, radius);
  Plane tmp(src.w, src.h), out(src.w, src.h);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double s = 0;
      for (int d = -radius; d <= radius; ++d) s += k[d + radius] * src.clamped(x + d, y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double s = 0;
      for (int d = -radius; d <= radius; ++d) s += k[d + radius] * tmp.clamped(x, y + d);
      out.at(x, y) = s;
    }
  return out;
}

void sobel_xy(const Plane& p, int x, int y, double& gx, double& gy) {
  const double a = p.clamped(x - 1, y - 1), b = p.clamped(x, y - 1), c = p.clamped(x + 1, y - 1);
  const double d = p.clamped(x - 1, y), f = p.clamped(x + 1, y);
  const double g = p.clamped(x - 1, y + 1), h = p.clamped(x, y + 1), i = p.clamped(x + 1, y + 1);
  gx = (c + 2 * f + i) - (a + 2 * d + g);
  gy = (g + 2 * h + i) - (a + 2 * b + c);
}

int blur_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

}  // namespace

std::string FilterKind::token() const {
  std::string base = tag == FilterTag::sobel ? "sobel" : tag == FilterTag::canny ? "canny" : "ghp";
  return variant == FilterVariant::inverse ? base : base + "_direct";
}

FilterKind FilterKind::from_token(std::string_view token) {
  for (const auto& k : all())
    if (k.token() == token) return k;
  throw Error("unknown filter token '" + std::string(token) + "'");
}

std::vector<FilterKind> FilterKind::all() {
  std::vector<FilterKind> out;
  for (auto t : {FilterTag::sobel, FilterTag::canny, FilterTag::gaussian_highpass})
    for (auto v : {FilterVariant::direct, FilterVariant::inverse}) out.push_back({t, v});
  return out;
}

std::vector<double> gaussian_kernel_1d(double sigma, int radius) {
  if (!(sigma > 0)) throw Error("sigma must be positive");
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& w : k) w /= sum;
  return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0)) throw Error("sigma must be positive");
  const Plane out = blur_plane(to_plane(img), sigma, blur_radius(sigma));
  GrayImage res(img.width(), img.height());
  for (std::size_t i = 0; i < out.v.size(); ++i) res.pixels()[i] = clamp_round(out.v[i]);
  return res;
}

GrayImage gaussian_highpass(const GrayImage& img, double sigma) {
  if (!(sigma > 0)) throw Error("sigma must be positive");
  const Plane src = to_plane(img);
  const Plane blurred = blur_plane(src, sigma, blur_radius(sigma));
  GrayImage res(img.width(), img.height());
  for (std::size_t i = 0; i < src.v.size(); ++i)
    res.pixels()[i] = clamp_round(src.v[i] - blurred.v[i] + 128.0);
  return res;
}

GrayImage sobel(const GrayImage& img) {
  if (img.width() < 3 || img.height() < 3) throw Error("image smaller than 3x3 kernel");
  const Plane p = to_plane(img);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double gx, gy;
      sobel_xy(p, x, y, gx, gy);
      out.at(x, y) = clamp_round(std::sqrt(gx * gx + gy * gy) / 4.0);
    }
  return out;
}

GrayImage canny(const GrayImage& img, int low, int high, double sigma) {
  if (low < 0 || high > 255 || low > high) throw Error("canny thresholds must satisfy 0 <= low <= high <= 255");
  if (img.width() < 5 || img.height() < 5) throw Error("image smaller than 5x5 kernel");
  const int w = img.width(), h = img.height();
  const Plane smooth = blur_plane(to_plane(img), sigma, 2);

  Plane mag(w, h);
  std::vector<std::uint8_t> dir(static_cast<std::size_t>(w) * h);
  const double tan22 = std::tan(M_PI / 8), tan67 = std::tan(3 * M_PI / 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx, gy;
      sobel_xy(smooth, x, y, gx, gy);
      mag.at(x, y) = std::sqrt(gx * gx + gy * gy);
      const double ax = std::abs(gx), ay = std::abs(gy);
      std::uint8_t d;
      if (ay <= ax * tan22) d = 0;          // horizontal gradient
      else if (ay > ax * tan67) d = 2;      // vertical gradient
      else d = (gx * gy > 0) ? 1 : 3;       // diagonals (y grows downward)
      dir[static_cast<std::size_t>(y) * w + x] = d;
    }

  // Non-maximum suppression. The strict/non-strict pair keeps exactly one of
  // two equal ridge pixels.
  static constexpr int kOff[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  const auto mag_or_zero = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : mag.at(x, y);
  };
  // 0 = none, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mag.at(x, y);
      if (m <= 0 || m < low) continue;
      const auto& o = kOff[dir[static_cast<std::size_t>(y) * w + x]];
      const double prev = mag_or_zero(x - o[0], y - o[1]);
      const double next = mag_or_zero(x + o[0], y + o[1]);
      if (m > prev && m >= next) cls[static_cast<std::size_t>(y) * w + x] = m >= high ? 2 : 1;
    }

  GrayImage out(w, h, 0);
  std::vector<int> stack;
  for (int i = 0; i < w * h; ++i)
    if (cls[i] == 2) stack.push_back(i);
  for (int i : stack) out.pixels()[i] = 255;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = ny * w + nx;
        if (cls[j] != 0 && out.pixels()[j] == 0) {
          out.pixels()[j] = 255;
          stack.push_back(j);
        }
      }
  }
  return out;
}

GrayImage blend_difference(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b);
  GrayImage out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels()[i] = static_cast<std::uint8_t>(std::abs(int(a.pixels()[i]) - int(b.pixels()[i])));
  return out;
}

GrayImage blend_grain_extract(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b);
  GrayImage out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels()[i] =
        static_cast<std::uint8_t>(std::clamp(int(a.pixels()[i]) - int(b.pixels()[i]) + 128, 0, 255));
  return out;
}

GrayImage apply(const FilterKind& kind, const GrayImage& img, const FilterParams& params) {
  GrayImage direct;
  switch (kind.tag) {
    case FilterTag::sobel: direct = sobel(img); break;
    case FilterTag::canny: direct = canny(img, params.canny_low, params.canny_high, params.canny_sigma); break;
    case FilterTag::gaussian_highpass: direct = gaussian_highpass(img, params.highpass_sigma); break;
  }
  return kind.variant == FilterVariant::inverse ? invert(direct) : direct;
}

}  // namespace tracekit
