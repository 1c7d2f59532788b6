// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "deepptych/metrics.hpp"
#include "test_support.hpp"

using namespace deepptych;
using deepptych::test_support::random_real;

namespace {

// Direct SSIM: for every valid 11x11 window, weighted moments from the
// full 2D Gaussian, then the mean of the local index.
double ssim_direct(const RealImage& x, const RealImage& y) {
  constexpr int w = 11;
  constexpr double sigma = 1.5;
  double kernel[w][w];
  double total = 0.0;
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      const double di = i - 5;
      const double dj = j - 5;
      kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += kernel[i][j];
    }
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + w <= x.rows(); ++r) {
    for (std::size_t c = 0; c + w <= x.cols(); ++c) {
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const double k = kernel[i][j] / total;
          mx += k * x(r + i, c + j);
          my += k * y(r + i, c + j);
        }
      }
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const double k = kernel[i][j] / total;
          const double a = x(r + i, c + j) - mx;
          const double b = y(r + i, c + j) - my;
          vx += k * a * a;
          vy += k * b * b;
          cov += k * a * b;
        }
      }
      acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

RealImage add_noise(const RealImage& ref, double std, SplitMix64& rng) {
  RealImage out = ref;
  for (auto& v : out) v += std * rng.gaussian();
  return out;
}

}  // namespace

TEST(Psnr, KnownValues) {
  EXPECT_NEAR(psnr(RealImage(8, 8, 0.0), RealImage(8, 8, 0.5)), 20.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(psnr(RealImage(8, 8, 0.0), RealImage(8, 8, 0.5)), 6.0206, 1e-4);
  EXPECT_NEAR(psnr(RealImage(8, 8, 0.0), RealImage(8, 8, 1.0)), 0.0, 1e-12);
  EXPECT_NEAR(psnr(RealImage(8, 8, 0.0), RealImage(8, 8, 1.0), 2.0), 20.0 * std::log10(2.0), 1e-12);
}

TEST(Psnr, IdenticalImagesAreInfinite) {
  SplitMix64 rng(1);
  const auto x = random_real(16, 16, rng);
  EXPECT_EQ(psnr(x, x), std::numeric_limits<double>::infinity());
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(RealImage(4, 4), RealImage(4, 5)), DimensionError);
  EXPECT_THROW(psnr(RealImage(4, 4), RealImage(4, 4), 0.0), ConfigError);
}

TEST(Psnr, Symmetric) {
  SplitMix64 rng(2);
  const auto a = random_real(16, 16, rng);
  const auto b = random_real(16, 16, rng);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, DecreasesWithNoiseLevel) {
  SplitMix64 rng(3);
  const auto ref = random_real(32, 32, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double std : {0.01, 0.05, 0.1}) {
    double mean = 0.0;
    for (int t = 0; t < 20; ++t) mean += psnr(add_noise(ref, std, rng), ref) / 20.0;
    EXPECT_LT(mean, previous) << "std " << std;
    previous = mean;
  }
}

TEST(Ssim, SelfSimilarityIsOne) {
  SplitMix64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const auto x = random_real(32, 32, rng);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
  }
  EXPECT_NEAR(ssim(RealImage(16, 16, 0.0), RealImage(16, 16, 0.0)), 1.0, 1e-12);
}

TEST(Ssim, LuminanceShiftLowersIndex) {
  SplitMix64 rng(5);
  const auto x = random_real(32, 32, rng, 0.2, 0.7);
  RealImage shifted = x;
  for (auto& v : shifted) v += 0.1;
  EXPECT_LT(ssim(shifted, x), 1.0);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  SplitMix64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_real(32, 32, rng);
    const auto b = random_real(32, 32, rng);
    EXPECT_NEAR(ssim(a, b), ssim_direct(a, b), 1e-9);
    const auto c = add_noise(a, 0.05, rng);
    EXPECT_NEAR(ssim(c, a), ssim_direct(c, a), 1e-9);
  }
}

TEST(Ssim, SymmetricAndBounded) {
  SplitMix64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_real(24, 24, rng);
    auto b = random_real(24, 24, rng);
    if (t % 2 == 1) {
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = 1.0 - a[i];
    }
    const double s = ssim(a, b);
    EXPECT_NEAR(s, ssim(b, a), 1e-12);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(RealImage(10, 10), RealImage(10, 10)), DimensionError);
  EXPECT_THROW(ssim(RealImage(16, 16), RealImage(16, 12)), DimensionError);
}

TEST(Ssim, TapsAreNormalised) {
  double sum = 0.0;
  for (double t : ssim_taps()) sum += t;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(Compare, RemapsSignedData) {
  RealImage signed_img(4, 4, -1.0);
  signed_img(1, 1) = 1.0;
  const auto mapped = remap_signed_unit(signed_img);
  EXPECT_EQ(mapped(0, 0), 0.0);
  EXPECT_EQ(mapped(1, 1), 1.0);
  SplitMix64 rng(8);
  const auto x = random_real(16, 16, rng);
  const auto r = compare(x, x);
  EXPECT_TRUE(std::isinf(r.psnr_db));
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
}
