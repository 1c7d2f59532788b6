// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "deepptych/error.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

struct MetricReport {
  double psnr_db = 0.0;  // +inf for identical images
  double ssim = 0.0;
};

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
inline double psnr(const RealImage& x, const RealImage& ref, double peak = 1.0) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw ConfigError("psnr peak must be positive");
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sse += (x[i] - ref[i]) * (x[i] - ref[i]);
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

namespace ssim_params {
inline constexpr std::size_t kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kK1 = 0.01;
inline constexpr double kK2 = 0.03;
inline constexpr double kRange = 1.0;
}  // namespace ssim_params

/// Normalised 1D Gaussian taps; the 2D window is their outer product.
inline std::array<double, ssim_params::kWindow> ssim_taps() {
  std::array<double, ssim_params::kWindow> taps{};
  const double center = static_cast<double>(ssim_params::kWindow / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2.0 * ssim_params::kSigma * ssim_params::kSigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows.
inline double ssim(const RealImage& x, const RealImage& ref) {
  require_same_shape(x, ref, "ssim");
  constexpr std::size_t w = ssim_params::kWindow;
  if (x.rows() < w || x.cols() < w) throw DimensionError("ssim needs images of at least 11x11");
  const auto taps = ssim_taps();
  const double c1 = (ssim_params::kK1 * ssim_params::kRange) * (ssim_params::kK1 * ssim_params::kRange);
  const double c2 = (ssim_params::kK2 * ssim_params::kRange) * (ssim_params::kK2 * ssim_params::kRange);
  const std::size_t out_rows = x.rows() - w + 1;
  const std::size_t out_cols = x.cols() - w + 1;

  // Horizontal pass of the five moment images, then vertical pass.
  auto filter = [&](auto&& value) {
    RealImage horiz(x.rows(), out_cols, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += taps[k] * value(r, c + k);
        horiz(r, c) = acc;
      }
    }
    RealImage out(out_rows, out_cols, 0.0);
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += taps[k] * horiz(r + k, c);
        out(r, c) = acc;
      }
    }
    return out;
  };

  const RealImage mu_x = filter([&](std::size_t r, std::size_t c) { return x(r, c); });
  const RealImage mu_y = filter([&](std::size_t r, std::size_t c) { return ref(r, c); });
  const RealImage xx = filter([&](std::size_t r, std::size_t c) { return x(r, c) * x(r, c); });
  const RealImage yy = filter([&](std::size_t r, std::size_t c) { return ref(r, c) * ref(r, c); });
  const RealImage xy = filter([&](std::size_t r, std::size_t c) { return x(r, c) * ref(r, c); });

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double vx = xx[i] - mx * mx;
    const double vy = yy[i] - my * my;
    const double cov = xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

inline MetricReport compare(const RealImage& x, const RealImage& ref) { return {psnr(x, ref, 1.0), ssim(x, ref)}; }

/// Affine map of [-1, 1] data onto [0, 1] before computing metrics.
inline RealImage remap_signed_unit(RealImage img) {
  for (auto& v : img) v = 0.5 * (v + 1.0);
  return img;
}

}  // namespace deepptych
