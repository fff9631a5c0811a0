#include "tracekit/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace tracekit {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw Error("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw Error("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw Error("pixel buffer does not match image dimensions");
}

std::uint8_t GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

Bitmap::Bitmap(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error("bitmap dimensions must be non-negative");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Bitmap::count_black() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_space(std::uint8_t c) { return std::isspace(c) != 0; }

// Reads one decimal header field, skipping whitespace and '#' comments.
int read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (is_space(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw Error("malformed header");
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1L << 30)) throw Error("malformed header");
    ++pos;
  }
  return static_cast<int>(value);
}

GrayImage load_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error("malformed PNG: " + std::string(image.message));

  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("malformed PNG: " + msg);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  if (gray) return GrayImage(w, h, std::move(buf));

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> r(n), g(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = buf[3 * i];
    g[i] = buf[3 * i + 1];
    b[i] = buf[3 * i + 2];
  }
  return to_grayscale(w, h, r, g, b);
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error("malformed header");
  std::size_t pos = 2;
  const int w = read_header_int(bytes, pos);
  const int h = read_header_int(bytes, pos);
  const int maxval = read_header_int(bytes, pos);
  if (w <= 0 || h <= 0) throw Error("malformed header");
  if (maxval != 255) throw Error("unsupported maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw Error("malformed header");
  ++pos;  // exactly one whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos < n) throw Error("malformed payload");
  return GrayImage(w, h, std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + n));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GrayImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing file " + path.string());
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(magic), 0, 8) == 0)
    return load_png(path);
  return decode_pgm(read_file(path));
}

GrayImage to_grayscale(int width, int height, std::span<const std::uint8_t> r,
                       std::span<const std::uint8_t> g, std::span<const std::uint8_t> b) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (r.size() != n || g.size() != n || b.size() != n) throw Error("channel size mismatch");
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return GrayImage(width, height, std::move(out));
}

GrayImage invert(const GrayImage& img) {
  GrayImage out = img;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

Bitmap threshold(const GrayImage& img, int t) {
  Bitmap bmp(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) bmp.set(x, y, img.at(x, y) < t);
  return bmp;
}

GrayImage prepare(const GrayImage& img, int side) {
  if (side <= 0) throw Error("side must be positive");
  const int crop = std::min(img.width(), img.height());
  const int x0 = (img.width() - crop) / 2;
  const int y0 = (img.height() - crop) / 2;
  if (crop == side && img.width() == img.height()) return img;

  GrayImage out(side, side);
  const double scale = static_cast<double>(crop) / side;
  for (int y = 0; y < side; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, crop - 1.0);
    const int iy = std::min(static_cast<int>(sy), crop - 2 < 0 ? 0 : crop - 2);
    const double fy = crop > 1 ? sy - iy : 0.0;
    for (int x = 0; x < side; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, crop - 1.0);
      const int ix = std::min(static_cast<int>(sx), crop - 2 < 0 ? 0 : crop - 2);
      const double fx = crop > 1 ? sx - ix : 0.0;
      const auto px = [&](int dx, int dy) {
        return static_cast<double>(img.clamped(x0 + ix + dx, y0 + iy + dy));
      };
      const double top = px(0, 0) * (1 - fx) + px(1, 0) * fx;
      const double bot = px(0, 1) * (1 - fx) + px(1, 1) * fx;
      const double v = top * (1 - fy) + bot * fy;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage transpose(const GrayImage& img) {
  GrayImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(x, y);
  return out;
}

}  // namespace tracekit
