#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tracekit/raster.hpp"

namespace tracekit::fixture {

inline GrayImage uniform(int w, int h, std::uint8_t v) { return GrayImage(w, h, v); }

/// Black disk on white, pixel centres within r of (cx, cy).
inline GrayImage disk(int side, double cx, double cy, double r) {
  GrayImage img(side, side, 255);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) img.at(x, y) = 0;
    }
  return img;
}

/// Black axis-aligned rectangle of pixels [x0, x1) x [y0, y1) on white.
inline GrayImage rect(int w, int h, int x0, int y0, int x1, int y1) {
  GrayImage img(w, h, 255);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.at(x, y) = 0;
  return img;
}

/// Left half `left`, right half `right`; the step sits between columns w/2-1 and w/2.
inline GrayImage vertical_step(int w, int h, std::uint8_t left, std::uint8_t right) {
  GrayImage img(w, h, left);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) img.at(x, y) = right;
  return img;
}

inline GrayImage noise(int w, int h, std::uint64_t seed, int lo = 0, int hi = 255) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(lo, hi);
  GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

/// Owning copy of the pixel buffer, safe to iterate over a temporary image.
inline std::vector<std::uint8_t> pixels_of(const GrayImage& img) {
  return {img.pixels().begin(), img.pixels().end()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tracekit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tracekit::fixture
