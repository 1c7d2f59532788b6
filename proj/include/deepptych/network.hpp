// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepptych/error.hpp"
#include "deepptych/rng.hpp"

namespace deepptych {

enum class Activation : std::uint8_t { none = 0, relu = 1, sigmoid = 2, tanh = 3 };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline double activate(Activation a, double v) noexcept {
  switch (a) {
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::tanh: return std::tanh(v);
    case Activation::none: break;
  }
  return v;
}

// Derivative expressed through the activation's output.
inline double activation_slope(Activation a, double out) noexcept {
  switch (a) {
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::tanh: return 1.0 - out * out;
    case Activation::none: break;
  }
  return 1.0;
}

/// Fully connected layer y = act(W x + b), W stored row-major out x in.
struct DenseLayer {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::none;

  DenseLayer() = default;
  DenseLayer(std::size_t out_dim, std::size_t in_dim, Activation act)
      : out(out_dim), in(in_dim), weights(out_dim * in_dim, 0.0), bias(out_dim, 0.0), activation(act) {}

  double& w(std::size_t o, std::size_t i) noexcept { return weights[o * in + i]; }
  [[nodiscard]] double w(std::size_t o, std::size_t i) const noexcept { return weights[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Glorot-style uniform(-sqrt(6/(in+out)), +sqrt(6/(in+out))) weights, zero bias.
inline void init_uniform(DenseLayer& layer, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  for (auto& v : layer.weights) v = rng.uniform(-limit, limit);
  for (auto& v : layer.bias) v = 0.0;
}

using Network = std::vector<DenseLayer>;

inline void check_chain(const Network& net) {
  if (net.empty()) throw ConfigError("network has no layers");
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& layer = net[i];
    if (layer.weights.size() != layer.out * layer.in || layer.bias.size() != layer.out) {
      throw ConfigError("layer " + std::to_string(i) + " parameter storage does not match its shape");
    }
    if (i > 0 && net[i - 1].out != layer.in) {
      throw ConfigError("layer " + std::to_string(i) + " input " + std::to_string(layer.in) +
                        " does not chain with previous output " + std::to_string(net[i - 1].out));
    }
  }
}

/// Activations of every layer boundary; front() is the input, back() the output.
using Activations = std::vector<std::vector<double>>;

inline Activations forward_trace(const Network& net, std::span<const double> input) {
  Activations acts;
  acts.reserve(net.size() + 1);
  acts.emplace_back(input.begin(), input.end());
  for (const auto& layer : net) {
    const auto& x = acts.back();
    std::vector<double> y(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* row = layer.weights.data() + o * layer.in;
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
      y[o] = activate(layer.activation, acc);
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

/// Parameter gradients laid out like a Network's weights and biases.
struct NetworkGradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  explicit NetworkGradient(const Network& net) {
    for (const auto& layer : net) {
      weights.emplace_back(layer.weights.size(), 0.0);
      bias.emplace_back(layer.bias.size(), 0.0);
    }
  }
};

/// Reverse-mode pass: returns d<cotangent, output>/d input and, when
/// `params` is given, accumulates the parameter gradients into it.
inline std::vector<double> backward(const Network& net, const Activations& acts,
                                    std::span<const double> cotangent, NetworkGradient* params = nullptr) {
  std::vector<double> grad(cotangent.begin(), cotangent.end());
  for (std::size_t li = net.size(); li-- > 0;) {
    const auto& layer = net[li];
    const auto& out = acts[li + 1];
    const auto& in = acts[li];
    for (std::size_t o = 0; o < layer.out; ++o) grad[o] *= activation_slope(layer.activation, out[o]);
    if (params != nullptr) {
      auto& gw = params->weights[li];
      auto& gb = params->bias[li];
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = grad[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* row = gw.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * in[i];
      }
    }
    std::vector<double> next(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = grad[o];
      if (d == 0.0) continue;
      const double* row = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) next[i] += row[i] * d;
    }
    grad = std::move(next);
  }
  return grad;
}

}  // namespace deepptych
