// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "deepptych/adam.hpp"
#include "deepptych/error.hpp"
#include "deepptych/generator.hpp"
#include "deepptych/network.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in (0, 1)");
  }
};

struct TrainResult {
  GeneratorWeights decoder;
  Network encoder;
  double initial_loss = 0.0;  // dataset MSE before the first update
  double final_loss = 0.0;    // dataset MSE after the last epoch
};

inline std::vector<double> encode(const Network& encoder, std::span<const double> image) {
  return forward_trace(encoder, image).back();
}

namespace detail {

inline double dataset_mse(const Network& encoder, const Network& decoder, const std::vector<RealImage>& data) {
  double acc = 0.0;
  for (const auto& img : data) {
    const auto z = encode(encoder, img.values());
    const auto out = forward_trace(decoder, z).back();
    for (std::size_t i = 0; i < out.size(); ++i) acc += (out[i] - img[i]) * (out[i] - img[i]);
  }
  return acc / static_cast<double>(data.size() * data.front().size());
}

}  // namespace detail

/// Trains a mirrored encoder/decoder pair on mean squared reconstruction
/// error with Adam and returns the decoder as a generator.
///
/// `arch` lists the decoder sizes from the latent dimension to side^2, e.g.
/// {16, 128, 256}. The encoder mirrors it with a linear latent layer.
inline TrainResult train_decoder(const std::vector<RealImage>& dataset, const std::vector<std::size_t>& arch,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const std::size_t n = dataset.front().size();
  for (const auto& img : dataset) {
    if (!img.same_shape(dataset.front())) throw DimensionError("training images differ in size");
  }
  if (arch.size() < 2 || arch.back() != n) {
    throw ConfigError("architecture must run from the latent size to " + std::to_string(n) + " outputs");
  }
  for (auto s : arch) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }

  TrainResult result;
  result.decoder = make_mlp_generator(arch, derive_seed(cfg.seed, 1));
  SplitMix64 init_rng(derive_seed(cfg.seed, 2));
  for (std::size_t i = arch.size() - 1; i > 0; --i) {
    const bool last = i == 1;
    DenseLayer layer(arch[i - 1], arch[i], last ? Activation::none : Activation::relu);
    init_uniform(layer, init_rng);
    result.encoder.push_back(std::move(layer));
  }
  Network& encoder = result.encoder;
  Network& decoder = result.decoder.layers;

  const AdamParams adam{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  std::vector<Adam> enc_w, enc_b, dec_w, dec_b;
  for (const auto& l : encoder) {
    enc_w.emplace_back(l.weights.size(), adam);
    enc_b.emplace_back(l.bias.size(), adam);
  }
  for (const auto& l : decoder) {
    dec_w.emplace_back(l.weights.size(), adam);
    dec_b.emplace_back(l.bias.size(), adam);
  }

  result.initial_loss = detail::dataset_mse(encoder, decoder, dataset);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 shuffle_rng(derive_seed(cfg.seed, 3));
  std::vector<double> cot(n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 2.0 / static_cast<double>((stop - start) * n);
      NetworkGradient genc(encoder);
      NetworkGradient gdec(decoder);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& img = dataset[order[b]];
        const auto enc_acts = forward_trace(encoder, img.values());
        const auto dec_acts = forward_trace(decoder, enc_acts.back());
        const auto& out = dec_acts.back();
        for (std::size_t i = 0; i < n; ++i) cot[i] = scale * (out[i] - img[i]);
        const auto dz = backward(decoder, dec_acts, cot, &gdec);
        backward(encoder, enc_acts, dz, &genc);
      }
      for (std::size_t l = 0; l < encoder.size(); ++l) {
        enc_w[l].step(encoder[l].weights, genc.weights[l]);
        enc_b[l].step(encoder[l].bias, genc.bias[l]);
      }
      for (std::size_t l = 0; l < decoder.size(); ++l) {
        dec_w[l].step(decoder[l].weights, gdec.weights[l]);
        dec_b[l].step(decoder[l].bias, gdec.bias[l]);
      }
    }
  }

  result.final_loss = detail::dataset_mse(encoder, decoder, dataset);
  if (!std::isfinite(result.final_loss)) throw NumericError("training diverged (non-finite loss)");
  return result;
}

}  // namespace deepptych
