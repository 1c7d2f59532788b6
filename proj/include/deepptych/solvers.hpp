// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepptych/adam.hpp"
#include "deepptych/error.hpp"
#include "deepptych/fft.hpp"
#include "deepptych/generator.hpp"
#include "deepptych/optics.hpp"
#include "deepptych/ptyt.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/tensor.hpp"
#include "deepptych/tv.hpp"

namespace deepptych {

struct SolverConfig {
  std::size_t steps = 2000;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  OptimizerKind optimizer = OptimizerKind::adam;
  double range_weight = 0.1;  // lambda in the split objective
  double tv_weight = 0.0;     // 0 disables TV
  double tv_epsilon = 1e-3;
  std::size_t x_steps = 1;
  std::size_t z_steps = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(range_weight >= 0.0)) throw ConfigError("range_weight must be >= 0");
    if (!(tv_weight >= 0.0)) throw ConfigError("tv_weight must be >= 0");
    if (!(tv_epsilon > 0.0)) throw ConfigError("tv_epsilon must be positive");
    if (x_steps == 0 || z_steps == 0) throw ConfigError("x_steps and z_steps must be positive");
  }

  [[nodiscard]] AdamParams adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct ReconResult {
  RealImage x_hat;
  std::optional<std::vector<double>> z_hat;  // absent for IERA
  std::vector<double> loss_trace;            // objective after each step
  std::size_t steps_run = 0;
  double initial_loss = 0.0;                 // objective before the first step

  [[nodiscard]] double final_loss() const { return loss_trace.empty() ? initial_loss : loss_trace.back(); }
};

/// Latent data loss L(z) = sum_l ||y_l - |A_l G(z)|||^2 and its gradient.
class LatentObjective {
 public:
  LatentObjective(const Measurements& m, const GeneratorWeights& g)
      : model_(m), y_(magnitudes_of(m)), g_(g) {
    g_.validate();
    if (g_.output_side != m.geometry.image_size) {
      throw DimensionError("generator emits " + std::to_string(g_.output_side) + "^2 images, geometry expects " +
                           std::to_string(m.geometry.image_size) + "^2");
    }
  }

  [[nodiscard]] double value(std::span<const double> z) const {
    return model_.data_loss(to_complex(generate(g_, z)), y_);
  }

  /// Returns L(z) and writes dL/dz = J^T (2 Re g) into `grad`.
  double value_and_gradient(std::span<const double> z, std::vector<double>& grad) const {
    check_latent(g_, z);
    const auto acts = forward_trace(g_.layers, z);
    const RealImage x(g_.output_side, g_.output_side, acts.back());
    const auto res = model_.residual(to_complex(x), y_);
    std::vector<double> cot(x.size());
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = 2.0 * res.gradient[i].real();
    grad = backward(g_.layers, acts, cot);
    return res.loss;
  }

 private:
  AcquisitionModel model_;
  std::vector<RealImage> y_;
  GeneratorWeights g_;
};

inline double loss(std::span<const double> z, const GeneratorWeights& g, const Measurements& m) {
  return LatentObjective(m, g).value(z);
}

inline std::vector<double> initial_latent(std::size_t k, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> z(k);
  for (auto& v : z) v = rng.gaussian();
  return z;
}

namespace detail {

inline void check_finite(double value, std::size_t step, const char* solver) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(solver) + ": non-finite objective at step " + std::to_string(step));
  }
}

}  // namespace detail

/// Latent-space descent through the generator: z0 ~ N(0, I) from cfg.seed,
/// then cfg.steps optimizer updates on L(z). The estimate is G(z_T).
inline ReconResult deep_ptych(const Measurements& m, const GeneratorWeights& g, const SolverConfig& cfg) {
  cfg.validate();
  const LatentObjective objective(m, g);
  std::vector<double> z = initial_latent(g.latent_dim, cfg.seed);
  Stepper opt(z.size(), cfg.optimizer, cfg.adam());
  ReconResult result;
  result.loss_trace.reserve(cfg.steps);
  std::vector<double> grad;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const double value = objective.value_and_gradient(z, grad);
    detail::check_finite(value, t, "deep_ptych");
    if (t == 0) {
      result.initial_loss = value;
    } else {
      result.loss_trace.push_back(value);
    }
    opt.step(z, grad);
  }
  const double final_value = objective.value(z);
  if (cfg.steps == 0) {
    result.initial_loss = final_value;
  } else {
    detail::check_finite(final_value, cfg.steps, "deep_ptych");
    result.loss_trace.push_back(final_value);
  }
  result.steps_run = cfg.steps;
  result.x_hat = generate(g, z);
  result.z_hat = std::move(z);
  return result;
}

/// Objective pieces of the range-relaxed problem at one (x, z).
struct SplitObjective {
  double data = 0.0;
  double range = 0.0;  // lambda ||x - G(z)||^2
  double tv = 0.0;     // tv_weight * TV(x)
  [[nodiscard]] double total() const { return data + range + tv; }
};

/// Gradient of the x-subproblem
///   sum_l ||y_l - |A_l x|||^2 + lambda ||x - G(z)||^2 + w TV(x)
/// with respect to a real image x. Returns the objective as well.
inline SplitObjective split_x_gradient(const AcquisitionModel& model, const std::vector<RealImage>& y,
                                       const RealImage& x, const RealImage& gz, const SolverConfig& cfg,
                                       std::vector<double>& grad) {
  const auto res = model.residual(to_complex(x), y);
  SplitObjective obj;
  obj.data = res.loss;
  grad.assign(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - gz[i];
    obj.range += cfg.range_weight * diff * diff;
    grad[i] = 2.0 * res.gradient[i].real() + 2.0 * cfg.range_weight * diff;
  }
  if (cfg.tv_weight > 0.0) {
    const auto tv = tv_value_grad(x, cfg.tv_epsilon);
    obj.tv = cfg.tv_weight * tv.value;
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] += cfg.tv_weight * tv.grad[i];
  }
  return obj;
}

/// Alternating descent on the range-relaxed objective. Each outer
/// iteration runs cfg.x_steps proximal-gradient updates on x (clamped to
/// [0, 1]) with z fixed, then cfg.z_steps optimizer updates on z with x
/// fixed. The coupling term is applied implicitly, so the x update stays
/// stable for any lambda. The estimate is x_T.
inline ReconResult deep_ptych_plus(const Measurements& m, const GeneratorWeights& g, const SolverConfig& cfg) {
  cfg.validate();
  g.validate();
  if (g.output_side != m.geometry.image_size) throw DimensionError("generator output does not match geometry");
  const AcquisitionModel model(m);
  const auto y = magnitudes_of(m);
  const std::size_t side = g.output_side;

  std::vector<double> z = initial_latent(g.latent_dim, cfg.seed);
  auto z_acts = forward_trace(g.layers, z);
  RealImage gz(side, side, z_acts.back());
  RealImage x = gz;

  const double kappa = 2.0 * cfg.range_weight * cfg.learning_rate;
  Stepper opt_z(z.size(), cfg.optimizer, cfg.adam());
  ReconResult result;
  result.loss_trace.reserve(cfg.steps);
  std::vector<double> grad;
  std::vector<double> cot(x.size());

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    for (std::size_t s = 0; s < cfg.x_steps; ++s) {
      const auto obj = split_x_gradient(model, y, x, gz, cfg, grad);
      if (s == 0) {
        detail::check_finite(obj.total(), t, "deep_ptych_plus");
        if (t == 0) {
          result.initial_loss = obj.total();
        } else {
          result.loss_trace.push_back(obj.total());
        }
      }
      // Explicit step on the data and TV terms, exact proximal step on the
      // range coupling, then projection onto [0, 1].
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double smooth = grad[i] - 2.0 * cfg.range_weight * (x[i] - gz[i]);
        const double half = x[i] - cfg.learning_rate * smooth;
        x[i] = std::clamp((half + kappa * gz[i]) / (1.0 + kappa), 0.0, 1.0);
      }
    }
    for (std::size_t s = 0; s < cfg.z_steps; ++s) {
      for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = 2.0 * cfg.range_weight * (gz[i] - x[i]);
      const auto zgrad = backward(g.layers, z_acts, cot);
      opt_z.step(z, zgrad);
      z_acts = forward_trace(g.layers, z);
      gz = RealImage(side, side, z_acts.back());
    }
  }
  {
    const auto obj = split_x_gradient(model, y, x, gz, cfg, grad);
    if (cfg.steps == 0) {
      result.initial_loss = obj.total();
    } else {
      detail::check_finite(obj.total(), cfg.steps, "deep_ptych_plus");
      result.loss_trace.push_back(obj.total());
    }
  }
  result.steps_run = cfg.steps;
  result.x_hat = std::move(x);
  result.z_hat = std::move(z);
  return result;
}

/// Error-reduction baseline: per camera, replace the band-limited field's
/// magnitude by the measurement at sampled pixels and write the corrected
/// band back into the spectrum estimate. Starts from the spectrum of
/// mean_l A_l^H y_l. The initialisation is deterministic, so `seed` only
/// keeps the solver signatures uniform.
inline ReconResult iera(const Measurements& m, const CameraArrayGeometry& geometry, std::size_t iters,
                        [[maybe_unused]] std::uint64_t seed) {
  if (iters < 1) throw ConfigError("iera needs at least one iteration");
  if (geometry.image_size != m.geometry.image_size || geometry.camera_count() != m.cameras.size()) {
    throw DimensionError("geometry does not match measurements");
  }
  const AcquisitionModel model(m);
  const auto y = magnitudes_of(m);
  const std::size_t n = geometry.image_size;
  const std::size_t cameras = model.camera_count();

  ComplexImage start(n, n);
  for (std::size_t l = 0; l < cameras; ++l) {
    const ComplexImage back = model.adjoint(to_complex(y[l]), l);
    for (std::size_t i = 0; i < start.size(); ++i) start[i] += back[i];
  }
  for (auto& v : start) v /= static_cast<double>(cameras);
  ComplexImage spectrum = fft2(start);

  ReconResult result;
  result.initial_loss = model.data_loss(start, y);
  detail::check_finite(result.initial_loss, 0, "iera");
  result.loss_trace.reserve(iters);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t l = 0; l < cameras; ++l) {
      ComplexImage field = model.band_field(spectrum, l);
      for (auto i : model.mask(l).kept) field[i] = y[l][i] * unit_phase(field[i]);
      const ComplexImage corrected = fft2(field);
      const RealImage& pupil = model.pupil(l);
      for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (pupil[i] != 0.0) spectrum[i] = corrected[i];
      }
    }
    const double residual = model.data_loss(ifft2(spectrum), y);
    detail::check_finite(residual, it + 1, "iera");
    result.loss_trace.push_back(residual);
  }
  result.steps_run = iters;
  result.x_hat = clamp01(magnitude(ifft2(spectrum)));
  return result;
}

/// Writes `<stem>.ptyt` (x_hat) and `<stem>.csv` with steps_run, the final
/// loss and one "step,loss" line per step.
inline void save_recon(const std::filesystem::path& stem, const ReconResult& r) {
  save_ptyt(std::filesystem::path(stem).replace_extension(".ptyt"), to_tensor(r.x_hat));
  std::ofstream os(std::filesystem::path(stem).replace_extension(".csv"));
  if (!os) throw FormatError("cannot write recon sidecar for " + stem.string());
  char buf[64];
  os << "steps_run," << r.steps_run << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", r.final_loss());
  os << "final_loss," << buf << '\n';
  os << "step,loss\n";
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss_trace[i]);
    os << i + 1 << ',' << buf << '\n';
  }
}

}  // namespace deepptych
