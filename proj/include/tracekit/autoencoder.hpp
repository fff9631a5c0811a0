#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tracekit/nn/model.hpp"
#include "tracekit/nn/optim.hpp"
#include "tracekit/raster.hpp"

namespace tracekit {

using AeModel = nn::Model<float>;

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";  // "adam" | "sgd"
};

struct TrainResult {
  AeModel model;
  std::vector<double> epoch_loss;
};

/// Called after each epoch with (epoch index from 1, mean training loss).
using EpochCallback = std::function<void(int, double)>;

/// Pixels scaled to [0, 1] as a (h, w, 1) tensor.
nn::Tensor<float> to_tensor(const GrayImage& img);
/// Inverse of to_tensor: round(v * 255), clamped.
GrayImage from_tensor(const nn::Tensor<float>& t);

/// Freshly initialised model with the standard 256x256 architecture.
AeModel make_model(std::uint64_t seed, int side = 256);

struct Reconstruction {
  GrayImage image;
  nn::Tensor<float> bottleneck;
};

/// Inference: reconstruction plus the (32, 32, 4) bottleneck code.
Reconstruction forward(const AeModel& model, const GrayImage& img);

/// Deterministic for a fixed seed: fixed initialisation, fixed shuffles,
/// single-threaded reductions.
TrainResult train(const TrainConfig& config, std::span<const GrayImage> dataset, const EpochCallback& on_epoch = {});

/// Continue training an existing model.
TrainResult train(AeModel model, const TrainConfig& config, std::span<const GrayImage> dataset,
                  const EpochCallback& on_epoch = {});

// TKAE model file, all integers and floats little-endian:
//   "TKAE" | u32 version=1 | u32 in_h, in_w, in_c | i32 bottleneck_layer | u32 layer_count
//   per layer: u8 kind, u8 activation, u8 stride, u8 reserved, u32 kh, kw, in_c, out_c
//   per layer, in order and only where present: weights, bias, gamma, beta,
//   running_mean, running_var as f32 arrays whose lengths follow from the layer table.
constexpr std::uint32_t kModelFormatVersion = 1;
std::vector<std::uint8_t> encode_model(const AeModel& model);
AeModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const AeModel& model, const std::filesystem::path& path);
AeModel load_model(const std::filesystem::path& path);

}  // namespace tracekit
