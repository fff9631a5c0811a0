#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tracekit/autoencoder.hpp"

namespace tracekit {

namespace {

constexpr char kMagic[4] = {'T', 'K', 'A', 'E'};

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void floats(const nn::Buffer<float>& v) {
    for (float f : v) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("model file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  nn::Buffer<float> floats(std::size_t n) {
    need(n * 4);
    nn::Buffer<float> v(n);
    for (auto& f : v) f = std::bit_cast<float>(u32());
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

int checked_dim(std::uint32_t v, const char* what) {
  if (v > 1u << 16) throw Error(std::string("model file: implausible ") + what + " " + std::to_string(v));
  return static_cast<int>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const AeModel& model) {
  const auto& arch = model.architecture();
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(arch.input.h));
  w.u32(static_cast<std::uint32_t>(arch.input.w));
  w.u32(static_cast<std::uint32_t>(arch.input.c));
  w.i32(arch.bottleneck_layer);
  w.u32(static_cast<std::uint32_t>(arch.layers.size()));
  for (const auto& l : arch.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.act));
    w.u8(static_cast<std::uint8_t>(l.stride));
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(l.kh));
    w.u32(static_cast<std::uint32_t>(l.kw));
    w.u32(static_cast<std::uint32_t>(l.in_c));
    w.u32(static_cast<std::uint32_t>(l.out_c));
  }
  for (const auto& p : model.params()) {
    w.floats(p.weights);
    w.floats(p.bias);
    w.floats(p.gamma);
    w.floats(p.beta);
    w.floats(p.running_mean);
    w.floats(p.running_var);
  }
  return std::move(w.out);
}

AeModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("not a TKAE model file (bad magic)");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) throw Error("unsupported version " + std::to_string(version));
  nn::Architecture arch;
  arch.input.h = checked_dim(r.u32(), "input height");
  arch.input.w = checked_dim(r.u32(), "input width");
  arch.input.c = checked_dim(r.u32(), "input channels");
  arch.bottleneck_layer = r.i32();
  const std::uint32_t n = r.u32();
  if (n > 4096) throw Error("model file: implausible layer count " + std::to_string(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    nn::LayerSpec l;
    const std::uint8_t kind = r.u8(), act = r.u8();
    if (kind > static_cast<std::uint8_t>(nn::LayerKind::activation)) throw Error("model file: unknown layer kind");
    if (act > static_cast<std::uint8_t>(nn::Activation::sigmoid)) throw Error("model file: unknown activation");
    l.kind = static_cast<nn::LayerKind>(kind);
    l.act = static_cast<nn::Activation>(act);
    l.stride = r.u8();
    r.u8();
    l.kh = checked_dim(r.u32(), "kernel height");
    l.kw = checked_dim(r.u32(), "kernel width");
    l.in_c = checked_dim(r.u32(), "input channels");
    l.out_c = checked_dim(r.u32(), "output channels");
    if (l.stride < 1) throw Error("model file: zero stride");
    arch.layers.push_back(l);
  }
  if (arch.bottleneck_layer < -1 || arch.bottleneck_layer >= static_cast<int>(n))
    throw Error("model file: bottleneck index out of range");
  std::vector<nn::LayerParams<float>> params(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& l = arch.layers[i];
    auto& p = params[i];
    if (l.kind == nn::LayerKind::conv || l.kind == nn::LayerKind::conv_transpose) {
      p.weights = r.floats(static_cast<std::size_t>(l.kh) * l.kw * l.in_c * l.out_c);
      p.bias = r.floats(l.out_c);
    } else if (l.kind == nn::LayerKind::batchnorm) {
      p.gamma = r.floats(l.in_c);
      p.beta = r.floats(l.in_c);
      p.running_mean = r.floats(l.in_c);
      p.running_var = r.floats(l.in_c);
    }
  }
  if (!r.at_end()) throw Error("model file has trailing bytes");
  return AeModel(std::move(arch), std::move(params));
}

void save_model(const AeModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_model(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

AeModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open model " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

}  // namespace tracekit
