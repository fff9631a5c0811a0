#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "../support/fixtures.hpp"
#include "tracekit/metrics.hpp"

namespace tracekit {
namespace {

GrayImage add_noise(const GrayImage& img, int amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-amplitude, amplitude);
  GrayImage out = img;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(std::clamp(p + d(rng), 0, 255));
  return out;
}

TEST(Mse, Examples) {
  const auto a = fixture::noise(20, 20, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(fixture::uniform(9, 9, 100), fixture::uniform(9, 9, 110)), 100.0);
  const GrayImage x(2, 1, std::vector<std::uint8_t>{0, 255}), y(2, 1, std::vector<std::uint8_t>{255, 0});
  EXPECT_EQ(mse(x, y), 65025.0);
  EXPECT_THROW(mse(a, fixture::noise(20, 21, 1)), Error);
}

TEST(Mse, Symmetric) {
  const auto a = fixture::noise(31, 17, 2), b = fixture::noise(31, 17, 3);
  EXPECT_EQ(mse(a, b), mse(b, a));
}

TEST(Ssim, IdenticalIsExactlyOne) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = fixture::noise(40, 33, s);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ssim(a, a, SsimParams::gaussian()), 1.0, 1e-12);
  }
  EXPECT_EQ(ssim(fixture::uniform(8, 8, 0), fixture::uniform(8, 8, 0)), 1.0);
}

TEST(Ssim, ConstantImagesReduceToLuminanceTerm) {
  const double v = ssim(fixture::uniform(16, 16, 100), fixture::uniform(16, 16, 120));
  EXPECT_NEAR(v, 24006.5025 / 24406.5025, 1e-12);
  EXPECT_NEAR(v, 0.9836, 1e-3);
}

TEST(Ssim, Symmetric) {
  const auto a = fixture::noise(30, 30, 5), b = fixture::noise(30, 30, 6);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
  EXPECT_DOUBLE_EQ(ssim(a, b, SsimParams::gaussian()), ssim(b, a, SsimParams::gaussian()));
}

TEST(Ssim, TransposeInvariant) {
  const auto a = fixture::disk(40, 18, 22, 9), b = add_noise(a, 40, 7);
  EXPECT_NEAR(ssim(a, b), ssim(transpose(a), transpose(b)), 1e-12);
}

TEST(Ssim, DecreasesWithNoiseAmplitude) {
  const auto base = fixture::disk(64, 30, 34, 20);
  double prev = 1.0;
  for (int amp : {10, 40, 120}) {
    const double v = ssim(base, add_noise(base, amp, 11));
    EXPECT_LT(v, prev) << amp;
    EXPECT_GE(v, -1.0);
    prev = v;
  }
}

TEST(Ssim, MatchesDirectWindowEvaluation) {
  const auto a = fixture::noise(12, 10, 8), b = fixture::noise(12, 10, 9);
  const int w = 7;
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  int count = 0;
  for (int y0 = 0; y0 + w <= 10; ++y0)
    for (int x0 = 0; x0 + w <= 12; ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + w; ++y)
        for (int x = x0; x < x0 + w; ++x) ma += a.at(x, y), mb += b.at(x, y);
      ma /= w * w, mb /= w * w;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + w; ++y)
        for (int x = x0; x < x0 + w; ++x) {
          va += (a.at(x, y) - ma) * (a.at(x, y) - ma);
          vb += (b.at(x, y) - mb) * (b.at(x, y) - mb);
          cov += (a.at(x, y) - ma) * (b.at(x, y) - mb);
        }
      va /= w * w, vb /= w * w, cov /= w * w;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  EXPECT_NEAR(ssim(a, b), total / count, 1e-12);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(fixture::uniform(10, 10, 0), fixture::uniform(10, 11, 0)), Error);
  EXPECT_THROW(ssim(fixture::uniform(6, 10, 0), fixture::uniform(6, 10, 0)), Error);
  SsimParams p;
  p.window = 4;
  EXPECT_THROW(ssim(fixture::uniform(10, 10, 0), fixture::uniform(10, 10, 0), p), Error);
  p.window = 1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.k1 = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Ssim, WindowSizeParameter) {
  const auto a = fixture::disk(32, 16, 16, 8), b = add_noise(a, 30, 2);
  SsimParams p;
  p.window = 3;
  const double v3 = ssim(a, b, p);
  p.window = 11;
  EXPECT_NE(v3, ssim(a, b, p));
  EXPECT_THROW(ssim(fixture::uniform(10, 10, 0), fixture::uniform(10, 10, 0), SsimParams::gaussian()), Error);
}

TEST(Summarize, SingleValue) {
  const std::vector<double> v{5};
  EXPECT_EQ(summarize(v), (Summary{1, 5, 0, 5, 5, 5, 5, 5}));
}

TEST(Summarize, FourValues) {
  const std::vector<double> v{4, 1, 3, 2};
  const auto s = summarize(v);
  EXPECT_EQ(s.n, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, 1.118, 1e-3);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_DOUBLE_EQ(s.max, 4);
}

TEST(Summarize, OrderedQuartilesOnRandomData) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int n = 1; n < 40; ++n) {
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    const auto s = summarize(v);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
    EXPECT_GE(s.std, 0);
  }
}

TEST(Summarize, ReportedSobelDirectFigures) {
  // two samples placed one population std either side of the mean
  const std::vector<double> v{0.202 - 0.044, 0.202 + 0.044};
  const auto s = summarize(v);
  EXPECT_NEAR(s.mean, 0.202, 1e-12);
  EXPECT_NEAR(s.std, 0.044, 1e-12);
}

TEST(Summarize, Errors) {
  EXPECT_THROW(summarize(std::vector<double>{}), Error);
  EXPECT_THROW(summarize(std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}), Error);
}

}  // namespace
}  // namespace tracekit
