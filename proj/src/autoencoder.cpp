#include "tracekit/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tracekit {

nn::Tensor<float> to_tensor(const GrayImage& img) {
  nn::Tensor<float> t(nn::Shape{img.height(), img.width(), 1});
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) t.data[i] = static_cast<float>(px[i]) / 255.0f;
  return t;
}

GrayImage from_tensor(const nn::Tensor<float>& t) {
  if (t.c() != 1) throw Error("from_tensor: expected a single channel, got " + t.shape.str());
  GrayImage img(t.w(), t.h());
  auto px = img.pixels();
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const double v = std::round(static_cast<double>(t.data[i]) * 255.0);
    px[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return img;
}

AeModel make_model(std::uint64_t seed, int side) { return AeModel(nn::standard_architecture(side), seed); }

Reconstruction forward(const AeModel& model, const GrayImage& img) {
  const auto& in = model.architecture().input;
  if (img.width() != in.w || img.height() != in.h)
    throw Error("autoencoder expects a " + std::to_string(in.w) + "x" + std::to_string(in.h) + " image, got " +
                std::to_string(img.width()) + "x" + std::to_string(img.height()));
  Reconstruction r;
  r.image = from_tensor(model.infer(to_tensor(img), &r.bottleneck));
  return r;
}

namespace {

// Batches of the shuffled order; a trailing batch of one sample is folded
// into its predecessor because batch statistics need at least two.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t bs) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += bs)
    out.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + bs));
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const GrayImage> dataset, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error("training dataset is empty");
  return train(AeModel(nn::standard_architecture(dataset[0].width()), config.seed), config, dataset, on_epoch);
}

TrainResult train(AeModel model, const TrainConfig& config, std::span<const GrayImage> dataset,
                  const EpochCallback& on_epoch) {
  if (config.epochs < 1) throw Error("epochs must be at least 1");
  if (config.batch_size < 1) throw Error("batch size must be at least 1");
  if (!(config.learning_rate > 0)) throw Error("learning rate must be positive");
  if (config.optimizer != "adam" && config.optimizer != "sgd") throw Error("unknown optimizer '" + config.optimizer + "'");
  if (dataset.size() < 2) throw Error("training needs at least 2 images");

  const auto& in = model.architecture().input;
  std::vector<nn::Tensor<float>> data;
  data.reserve(dataset.size());
  for (const auto& img : dataset) {
    if (img.width() != in.w || img.height() != in.h)
      throw Error("training image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                  ", model expects " + std::to_string(in.w) + "x" + std::to_string(in.h));
    data.push_back(to_tensor(img));
  }

  nn::Adam<float> adam(nn::AdamConfig{config.learning_rate});
  nn::Sgd<float> sgd(config.learning_rate);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  AeModel::Cache cache;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(shuffle_rng)]);
    }
    double loss_sum = 0;
    for (const auto& idx : make_batches(order, static_cast<std::size_t>(config.batch_size))) {
      nn::Batch<float> x;
      x.reserve(idx.size());
      for (auto k : idx) x.push_back(data[k]);
      const auto y = model.forward_train(x, cache);
      nn::Batch<float> grad;
      const double loss = nn::loss_mse(y, x, &grad);
      loss_sum += loss * static_cast<double>(idx.size());
      auto g = model.backward(cache, std::move(grad));
      if (config.optimizer == "adam") adam.step(model, g.params);
      else sgd.step(model, g.params);
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) throw Error("training diverged at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace tracekit
