#include "tracekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "tracekit/error.hpp"

namespace tracekit {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

GrayImage quantize(int side, const std::vector<double>& v) {
  GrayImage img(side, side, 0);
  auto px = img.pixels();
  for (std::size_t i = 0; i < v.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v[i]), 0L, 255L));
  return img;
}

// Smooth closed outline: radius modulated by a few low harmonics.
struct Blob {
  double cx, cy, r;
  double amp[3], phase[3];
  double value, softness;

  static Blob random(Rng& rng, int side, double rmin, double rmax, double value) {
    Blob b{};
    b.cx = uniform(rng, 0.15, 0.85) * side;
    b.cy = uniform(rng, 0.15, 0.85) * side;
    b.r = uniform(rng, rmin, rmax) * side;
    for (int k = 0; k < 3; ++k) {
      b.amp[k] = uniform(rng, 0.0, 0.25 / (k + 1));
      b.phase[k] = uniform(rng, 0.0, 2 * std::numbers::pi);
    }
    b.value = value;
    b.softness = uniform(rng, 0.8, 3.0);
    return b;
  }

  // Coverage in [0, 1] with a soft edge.
  double coverage(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double th = std::atan2(dy, dx);
    double rr = r;
    for (int k = 0; k < 3; ++k) rr *= 1.0 + amp[k] * std::sin((k + 2) * th + phase[k]);
    const double d = std::hypot(dx, dy) - rr;
    return 1.0 / (1.0 + std::exp(d / softness));
  }
};

GrayImage blobs(Rng& rng, int side) {
  std::vector<double> v(static_cast<std::size_t>(side) * side, uniform(rng, 200, 240));
  const int n = std::uniform_int_distribution<int>(2, 4)(rng);
  for (int i = 0; i < n; ++i) {
    const Blob b = Blob::random(rng, side, 0.08, 0.22, uniform(rng, 10, 70));
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        auto& p = v[static_cast<std::size_t>(y) * side + x];
        p += (b.value - p) * b.coverage(x + 0.5, y + 0.5);
      }
  }
  return quantize(side, v);
}

GrayImage scene(Rng& rng, int side) {
  std::vector<double> v(static_cast<std::size_t>(side) * side);
  const double g0 = uniform(rng, 60, 200), g1 = uniform(rng, 60, 200);
  const double ang = uniform(rng, 0, 2 * std::numbers::pi);
  const double ux = std::cos(ang), uy = std::sin(ang);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double t = 0.5 + ((x - side / 2.0) * ux + (y - side / 2.0) * uy) / side;
      v[static_cast<std::size_t>(y) * side + x] = g0 + (g1 - g0) * std::clamp(t, 0.0, 1.0);
    }

  const int n = std::uniform_int_distribution<int>(3, 7)(rng);
  for (int i = 0; i < n; ++i) {
    const Blob b = Blob::random(rng, side, 0.05, 0.3, uniform(rng, 0, 255));
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        auto& p = v[static_cast<std::size_t>(y) * side + x];
        p += (b.value - p) * b.coverage(x + 0.5, y + 0.5);
      }
  }

  // fine texture: a few random plane waves
  const int waves = 4;
  for (int k = 0; k < waves; ++k) {
    const double fa = uniform(rng, 0, 2 * std::numbers::pi), freq = uniform(rng, 0.08, 0.4);
    const double amp = uniform(rng, 2, 8), ph = uniform(rng, 0, 2 * std::numbers::pi);
    const double fx = std::cos(fa) * freq, fy = std::sin(fa) * freq;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) v[static_cast<std::size_t>(y) * side + x] += amp * std::sin(fx * x + fy * y + ph);
  }

  std::normal_distribution<double> noise(0.0, uniform(rng, 2, 6));
  for (auto& p : v) p += noise(rng);
  return quantize(side, v);
}

}  // namespace

GrayImage synth_image(std::uint64_t seed, SynthKind kind, int side) {
  if (side <= 0) throw Error("image side must be positive");
  Rng rng(seed * 0x2545f4914f6cdd1dULL + 0x9e37);
  return kind == SynthKind::blobs ? blobs(rng, side) : scene(rng, side);
}

std::vector<GrayImage> synth_corpus(int count, std::uint64_t seed, SynthKind kind, int side) {
  std::vector<GrayImage> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) out.push_back(synth_image(seed + static_cast<std::uint64_t>(i), kind, side));
  return out;
}

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, const std::vector<GrayImage>& images) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%04zu.pgm", i);
    paths.push_back(dir / name);
    save_pgm(images[i], paths.back());
  }
  return paths;
}

}  // namespace tracekit
