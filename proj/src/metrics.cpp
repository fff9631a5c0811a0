#include "tracekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tracekit/error.hpp"

namespace tracekit {

namespace {

void check_same_size(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error("image sizes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

// Summed-area table with one row/column of zero padding.
class Integral {
 public:
  template <class F>
  Integral(int w, int h, F f) : w_(w + 1), s_(static_cast<std::size_t>(w + 1) * (h + 1), 0) {
    for (int y = 0; y < h; ++y) {
      std::int64_t row = 0;
      for (int x = 0; x < w; ++x) {
        row += f(x, y);
        s_[idx(x + 1, y + 1)] = s_[idx(x + 1, y)] + row;
      }
    }
  }
  std::int64_t box(int x, int y, int n) const {
    return s_[idx(x + n, y + n)] - s_[idx(x, y + n)] - s_[idx(x + n, y)] + s_[idx(x, y)];
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  int w_;
  std::vector<std::int64_t> s_;
};

double ssim_term(double ma, double mb, double va, double vb, double cov, double c1, double c2) {
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double ssim_uniform(const GrayImage& a, const GrayImage& b, const SsimParams& p, double c1, double c2) {
  const int w = a.width(), h = a.height(), n = p.window;
  const Integral sa(w, h, [&](int x, int y) { return std::int64_t{a.at(x, y)}; });
  const Integral sb(w, h, [&](int x, int y) { return std::int64_t{b.at(x, y)}; });
  const Integral saa(w, h, [&](int x, int y) { return std::int64_t{a.at(x, y)} * a.at(x, y); });
  const Integral sbb(w, h, [&](int x, int y) { return std::int64_t{b.at(x, y)} * b.at(x, y); });
  const Integral sab(w, h, [&](int x, int y) { return std::int64_t{a.at(x, y)} * b.at(x, y); });
  const double area = static_cast<double>(n) * n;
  const double area2 = area * area;
  double total = 0;
  for (int y = 0; y + n <= h; ++y) {
    double row = 0;
    for (int x = 0; x + n <= w; ++x) {
      const std::int64_t ta = sa.box(x, y, n), tb = sb.box(x, y, n);
      const std::int64_t k = static_cast<std::int64_t>(n) * n;
      // exact integer numerators keep the variances non-negative
      const double va = static_cast<double>(k * saa.box(x, y, n) - ta * ta) / area2;
      const double vb = static_cast<double>(k * sbb.box(x, y, n) - tb * tb) / area2;
      const double cov = static_cast<double>(k * sab.box(x, y, n) - ta * tb) / area2;
      row += ssim_term(ta / area, tb / area, va, vb, cov, c1, c2);
    }
    total += row;
  }
  return total / (static_cast<double>(w - n + 1) * (h - n + 1));
}

double ssim_gaussian(const GrayImage& a, const GrayImage& b, const SsimParams& p, double c1, double c2) {
  const int w = a.width(), h = a.height(), n = p.window, r = n / 2;
  std::vector<double> k1d(static_cast<std::size_t>(n));
  double ksum = 0;
  for (int i = 0; i < n; ++i) {
    const double d = i - r;
    k1d[i] = std::exp(-d * d / (2 * p.gaussian_sigma * p.gaussian_sigma));
    ksum += k1d[i];
  }
  for (auto& v : k1d) v /= ksum;

  // separable weighted moments over valid positions
  const int ow = w - n + 1, oh = h - n + 1;
  auto filter = [&](auto f) {
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += k1d[i] * f(x + i, y);
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += k1d[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return out;
  };
  const auto ma = filter([&](int x, int y) { return double(a.at(x, y)); });
  const auto mb = filter([&](int x, int y) { return double(b.at(x, y)); });
  const auto maa = filter([&](int x, int y) { return double(a.at(x, y)) * a.at(x, y); });
  const auto mbb = filter([&](int x, int y) { return double(b.at(x, y)) * b.at(x, y); });
  const auto mab = filter([&](int x, int y) { return double(a.at(x, y)) * b.at(x, y); });
  double total = 0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double va = std::max(0.0, maa[i] - ma[i] * ma[i]);
    const double vb = std::max(0.0, mbb[i] - mb[i] * mb[i]);
    const double cov = mab[i] - ma[i] * mb[i];
    total += ssim_term(ma[i], mb[i], va, vb, cov, c1, c2);
  }
  return total / static_cast<double>(ma.size());
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0) throw Error("SSIM window must be odd and at least 3");
  if (!(k1 > 0) || !(k2 > 0)) throw Error("SSIM constants k1, k2 must be positive");
  if (!(dynamic_range > 0)) throw Error("SSIM dynamic range must be positive");
  if (weighting == SsimWeighting::gaussian && !(gaussian_sigma > 0)) throw Error("SSIM gaussian sigma must be positive");
}

double mse(const GrayImage& a, const GrayImage& b) {
  check_same_size(a, b);
  const auto pa = a.pixels(), pb = b.pixels();
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const int d = int(pa[i]) - int(pb[i]);
    acc += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(acc) / static_cast<double>(pa.size());
}

double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& p) {
  p.validate();
  check_same_size(a, b);
  if (a.width() < p.window || a.height() < p.window)
    throw Error("image smaller than SSIM window (" + std::to_string(p.window) + ")");
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  return p.weighting == SsimWeighting::uniform ? ssim_uniform(a, b, p, c1, c2) : ssim_gaussian(a, b, p, c1, c2);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw Error("cannot summarize an empty list");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v)
    if (!std::isfinite(x)) throw Error("cannot summarize non-finite values");
  std::sort(v.begin(), v.end());
  Summary s;
  s.n = v.size();
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  return s;
}

}  // namespace tracekit
