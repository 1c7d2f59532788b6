// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "deepptych/adam.hpp"
#include "deepptych/error.hpp"
#include "deepptych/network.hpp"
#include "deepptych/ptyt.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

enum class GeneratorKind : std::uint8_t { linear = 0, mlp = 1 };

/// Decoder G: R^k -> R^(side*side).
struct GeneratorWeights {
  GeneratorKind kind = GeneratorKind::mlp;
  std::size_t latent_dim = 0;
  std::size_t output_side = 0;
  Network layers;

  [[nodiscard]] std::size_t output_size() const noexcept { return output_side * output_side; }

  void validate() const {
    check_chain(layers);
    if (layers.front().in != latent_dim) throw ConfigError("first layer input does not match latent_dim");
    if (layers.back().out != output_size()) throw ConfigError("final layer output does not match output_side^2");
    if (kind == GeneratorKind::linear) {
      if (layers.size() != 1 || layers[0].activation != Activation::none) {
        throw ConfigError("linear generator must be a single layer without activation");
      }
    } else if (layers.back().activation != Activation::sigmoid) {
      throw ConfigError("mlp generator must end in a sigmoid");
    }
  }

  friend bool operator==(const GeneratorWeights&, const GeneratorWeights&) = default;
};

/// x = W z + b.
inline GeneratorWeights make_linear_generator(std::size_t output_side, std::size_t latent_dim,
                                              std::vector<double> weights, std::vector<double> bias) {
  GeneratorWeights g{GeneratorKind::linear, latent_dim, output_side, {}};
  DenseLayer layer(output_side * output_side, latent_dim, Activation::none);
  layer.weights = std::move(weights);
  layer.bias = std::move(bias);
  g.layers.push_back(std::move(layer));
  g.validate();
  return g;
}

/// Randomly initialised mlp decoder. `sizes` runs from k to side^2; hidden
/// layers use `hidden`, the output layer a sigmoid.
inline GeneratorWeights make_mlp_generator(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                           Activation hidden = Activation::relu) {
  if (sizes.size() < 2) throw ConfigError("architecture needs at least an input and an output size");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(sizes.back()))));
  if (side * side != sizes.back()) throw ConfigError("output size must be a perfect square");
  GeneratorWeights g{GeneratorKind::mlp, sizes.front(), side, {}};
  SplitMix64 rng(seed);
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const bool last = i + 1 == sizes.size();
    DenseLayer layer(sizes[i], sizes[i - 1], last ? Activation::sigmoid : hidden);
    init_uniform(layer, rng);
    g.layers.push_back(std::move(layer));
  }
  g.validate();
  return g;
}

inline void check_latent(const GeneratorWeights& g, std::span<const double> z) {
  if (z.size() != g.latent_dim) {
    throw DimensionError("latent vector has " + std::to_string(z.size()) + " entries, generator expects " +
                         std::to_string(g.latent_dim));
  }
}

inline RealImage generate(const GeneratorWeights& g, std::span<const double> z) {
  check_latent(g, z);
  auto acts = forward_trace(g.layers, z);
  return RealImage(g.output_side, g.output_side, std::move(acts.back()));
}

/// J(z)^T cotangent.
inline std::vector<double> generator_vjp(const GeneratorWeights& g, std::span<const double> z,
                                         std::span<const double> cotangent) {
  check_latent(g, z);
  if (cotangent.size() != g.output_size()) {
    throw DimensionError("cotangent has " + std::to_string(cotangent.size()) + " entries, generator emits " +
                         std::to_string(g.output_size()));
  }
  return backward(g.layers, forward_trace(g.layers, z), cotangent);
}

/// Least-squares latent for a linear generator: argmin_z ||x - (W z + b)||
/// through the normal equations and a Cholesky factorisation.
inline std::vector<double> fit_latent_leastsq(const GeneratorWeights& g, const RealImage& x) {
  if (g.kind != GeneratorKind::linear) throw ConfigError("fit_latent_leastsq requires a linear generator");
  if (x.size() != g.output_size()) throw DimensionError("image does not match generator output");
  const auto& layer = g.layers.front();
  const std::size_t n = layer.out;
  const std::size_t k = layer.in;

  std::vector<double> gram(k * k, 0.0);
  std::vector<double> rhs(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = layer.weights.data() + r * k;
    const double target = x[r] - layer.bias[r];
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += row[i] * target;
      for (std::size_t j = 0; j <= i; ++j) gram[i * k + j] += row[i] * row[j];
    }
  }

  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, gram[i * k + i]);
  // Lower-triangular factor in place.
  for (std::size_t j = 0; j < k; ++j) {
    double d = gram[j * k + j];
    for (std::size_t p = 0; p < j; ++p) d -= gram[j * k + p] * gram[j * k + p];
    if (!(d > 1e-12 * max_diag)) {
      const double cond = d > 0.0 ? max_diag / d : std::numeric_limits<double>::infinity();
      throw NumericError("generator matrix is rank deficient (condition estimate " + std::to_string(cond) + ")");
    }
    const double pivot = std::sqrt(d);
    gram[j * k + j] = pivot;
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = gram[i * k + j];
      for (std::size_t p = 0; p < j; ++p) s -= gram[i * k + p] * gram[j * k + p];
      gram[i * k + j] = s / pivot;
    }
  }
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = rhs[i];
    for (std::size_t p = 0; p < i; ++p) s -= gram[i * k + p] * z[p];
    z[i] = s / gram[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    double s = z[i];
    for (std::size_t p = i + 1; p < k; ++p) s -= gram[p * k + i] * z[p];
    z[i] = s / gram[i * k + i];
  }
  return z;
}

/// Latent whose image is closest to `x` under ||G(z) - x||^2, found by Adam
/// from a seeded Gaussian start. The returned latent's image lies in the
/// generator range by construction.
inline std::vector<double> project_to_range(const GeneratorWeights& g, const RealImage& x, std::size_t steps,
                                            double learning_rate, std::uint64_t seed) {
  if (x.size() != g.output_size()) throw DimensionError("image does not match generator output");
  if (g.kind == GeneratorKind::linear) return fit_latent_leastsq(g, x);
  SplitMix64 rng(seed);
  std::vector<double> z(g.latent_dim);
  for (auto& v : z) v = rng.gaussian();
  Adam opt(z.size(), {learning_rate, 0.9, 0.999, 1e-8});
  std::vector<double> cot(g.output_size());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto acts = forward_trace(g.layers, z);
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = 2.0 * (acts.back()[i] - x[i]);
    const auto grad = backward(g.layers, acts, cot);
    opt.step(z, grad);
  }
  return z;
}

// PTYG weight file (little-endian):
//   "PTYG" u8 kind u32 k u32 output_side u32 layer_count
//   per layer: u32 out u32 in u8 activation, W^T (in x out, row-major) f64, b f64

inline constexpr std::array<char, 4> kPtygMagic{'P', 'T', 'Y', 'G'};

inline void write_generator(std::ostream& os, const GeneratorWeights& g) {
  g.validate();
  os.write(kPtygMagic.data(), kPtygMagic.size());
  io::write_u8(os, static_cast<std::uint8_t>(g.kind));
  io::write_u32(os, static_cast<std::uint32_t>(g.latent_dim));
  io::write_u32(os, static_cast<std::uint32_t>(g.output_side));
  io::write_u32(os, static_cast<std::uint32_t>(g.layers.size()));
  for (const auto& layer : g.layers) {
    io::write_u32(os, static_cast<std::uint32_t>(layer.out));
    io::write_u32(os, static_cast<std::uint32_t>(layer.in));
    io::write_u8(os, static_cast<std::uint8_t>(layer.activation));
    for (std::size_t i = 0; i < layer.in; ++i) {
      for (std::size_t o = 0; o < layer.out; ++o) io::write_f64(os, layer.w(o, i));
    }
    for (double b : layer.bias) io::write_f64(os, b);
  }
}

inline GeneratorWeights read_generator(std::istream& is) {
  io::expect_magic(is, kPtygMagic, "PTYG");
  GeneratorWeights g;
  const auto kind = io::read_u8(is, "generator kind");
  if (kind > 1) throw FormatError("unknown generator kind " + std::to_string(kind));
  g.kind = static_cast<GeneratorKind>(kind);
  g.latent_dim = io::read_u32(is, "latent dim");
  g.output_side = io::read_u32(is, "output side");
  const auto count = io::read_u32(is, "layer count");
  if (count == 0 || count > 1024) throw FormatError("implausible layer count " + std::to_string(count));
  for (std::uint32_t li = 0; li < count; ++li) {
    const auto out = io::read_u32(is, "layer out");
    const auto in = io::read_u32(is, "layer in");
    const auto act = io::read_u8(is, "activation");
    if (act > 3) throw FormatError("unknown activation code " + std::to_string(act));
    if (std::uint64_t{out} * in > (std::uint64_t{1} << 28)) throw FormatError("layer too large");
    DenseLayer layer(out, in, static_cast<Activation>(act));
    for (std::size_t i = 0; i < layer.in; ++i) {
      for (std::size_t o = 0; o < layer.out; ++o) layer.w(o, i) = io::read_f64(is, "weights");
    }
    for (auto& b : layer.bias) b = io::read_f64(is, "bias");
    g.layers.push_back(std::move(layer));
  }
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid generator file: ") + e.what());
  }
  return g;
}

inline void save_generator(const std::filesystem::path& path, const GeneratorWeights& g) {
  auto os = io::open_output(path);
  write_generator(os, g);
  if (!os) throw FormatError("failed writing " + path.string());
}

inline GeneratorWeights load_generator(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_generator(is);
}

}  // namespace deepptych
