#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tracekit/error.hpp"

namespace tracekit {

/// 8-bit grayscale raster, row-major, 0 = black and 255 = white.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  // Edge-replicating read, for filters that pad by clamping.
  std::uint8_t clamped(int x, int y) const;

  std::span<std::uint8_t> pixels() { return data_; }
  std::span<const std::uint8_t> pixels() const { return data_; }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// 1-bit raster; true marks a black (foreground) pixel.
class Bitmap {
 public:
  Bitmap() = default;
  Bitmap(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }

  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  // Out-of-range reads are white.
  bool get_or_white(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && get(x, y);
  }
  std::size_t count_black() const;

  bool operator==(const Bitmap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Reads binary PGM (P5, maxval 255) or PNG. PNG colour input is reduced with
// to_grayscale.
GrayImage load_image(const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// BT.601 luminance, rounded and clamped.
GrayImage to_grayscale(int width, int height, std::span<const std::uint8_t> r,
                       std::span<const std::uint8_t> g, std::span<const std::uint8_t> b);

GrayImage invert(const GrayImage& img);

/// Pixels strictly darker than `t` become black.
Bitmap threshold(const GrayImage& img, int t = 128);

/// Center-crop to a square, then bilinear-resize to side x side.
GrayImage prepare(const GrayImage& img, int side);

GrayImage transpose(const GrayImage& img);

}  // namespace tracekit
