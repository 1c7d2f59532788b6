// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "deepptych/fft.hpp"
#include "deepptych/ptyt.hpp"
#include "test_support.hpp"

using namespace deepptych;
using deepptych::test_support::max_abs_diff;
using deepptych::test_support::random_complex;

namespace {

// O(N^2) unitary DFT straight from the definition.
ComplexImage naive_dft2(const ComplexImage& x) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  ComplexImage out(rows, cols);
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      Complex acc(0.0, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(u * r) / rows + static_cast<double>(v * c) / cols);
          acc += x(r, c) * std::polar(1.0, angle);
        }
      }
      out(u, v) = acc / std::sqrt(static_cast<double>(rows * cols));
    }
  }
  return out;
}

}  // namespace

TEST(Fft, DeltaMapsToConstant) {
  ComplexImage delta(4, 4);
  delta(0, 0) = 1.0;
  const auto spec = fft2(delta);
  for (const auto& v : spec) {
    EXPECT_NEAR(v.real(), 0.25, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
}

TEST(Fft, ConstantMapsToDelta) {
  const ComplexImage constant(4, 4, Complex(0.25, 0.0));
  for (const auto& out : {fft2(constant), ifft2(constant)}) {
    EXPECT_NEAR(out(0, 0).real(), 1.0, 1e-15);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_NEAR(std::abs(out[i]), 0.0, 1e-15);
  }
}

TEST(Fft, ZeroImageStaysZero) {
  const ComplexImage zero(8, 8);
  EXPECT_EQ(ifft2(zero), zero);
  EXPECT_EQ(fft2(zero), zero);
}

TEST(Fft, MatchesDirectDefinition) {
  SplitMix64 rng(11);
  for (auto [r, c] : {std::pair{4, 4}, std::pair{8, 16}, std::pair{16, 2}}) {
    const auto x = random_complex(r, c, rng);
    EXPECT_LT(max_abs_diff(fft2(x), naive_dft2(x)), 1e-12) << r << "x" << c;
  }
}

TEST(Fft, ParsevalAndRoundtripProperty) {
  SplitMix64 rng(2024);
  for (std::size_t n : {4, 16, 64, 128}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_complex(n, n, rng);
      const auto spec = fft2(x);
      EXPECT_LT(std::abs(norm2(spec) - norm2(x)) / norm2(x), 1e-10);
      EXPECT_LT(max_abs_diff(ifft2(spec), x), 1e-10);
      EXPECT_LT(max_abs_diff(fft2(ifft2(x)), x), 1e-10);
    }
  }
}

TEST(Fft, Linearity) {
  SplitMix64 rng(5);
  const Complex alpha(0.7, -1.3);
  const Complex beta(-2.1, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_complex(32, 32, rng);
    const auto y = random_complex(32, 32, rng);
    ComplexImage combo(32, 32);
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = alpha * x[i] + beta * y[i];
    const auto fx = fft2(x);
    const auto fy = fft2(y);
    ComplexImage expected(32, 32);
    for (std::size_t i = 0; i < combo.size(); ++i) expected[i] = alpha * fx[i] + beta * fy[i];
    EXPECT_LT(max_abs_diff(fft2(combo), expected), 1e-10);
  }
}

TEST(Fft, RejectsNonPowerOfTwo) {
  EXPECT_THROW(fft2(ComplexImage(6, 8)), DimensionError);
  EXPECT_THROW(ifft2(ComplexImage(8, 12)), DimensionError);
}

TEST(FftShift, DeltaMovesToCenter) {
  ComplexImage delta(4, 4);
  delta(0, 0) = 1.0;
  const auto shifted = fftshift(delta);
  EXPECT_EQ(shifted(2, 2), Complex(1.0, 0.0));
  EXPECT_EQ(norm2(shifted), 1.0);
}

TEST(FftShift, QuadrantSwap) {
  const ComplexImage img(2, 2, {1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(fftshift(img), ComplexImage(2, 2, {4.0, 3.0, 2.0, 1.0}));
}

TEST(FftShift, InvolutionOnEvenSizes) {
  SplitMix64 rng(8);
  for (auto [r, c] : {std::pair{2, 2}, std::pair{4, 8}, std::pair{16, 6}}) {
    const auto x = random_complex(r, c, rng);
    EXPECT_EQ(fftshift(fftshift(x)), x);
    EXPECT_EQ(ifftshift(fftshift(x)), x);
  }
  const auto odd = random_complex(3, 5, rng);
  EXPECT_EQ(ifftshift(fftshift(odd)), odd);
}

TEST(Hadamard, IdentityZeroAndAnalytic) {
  SplitMix64 rng(3);
  const auto a = random_complex(4, 4, rng);
  EXPECT_EQ(hadamard(a, ComplexImage(4, 4, Complex(1.0, 0.0))), a);
  EXPECT_EQ(hadamard(a, ComplexImage(4, 4)), ComplexImage(4, 4));
  const auto p = hadamard(ComplexImage(1, 1, Complex(1.0, 1.0)), ComplexImage(1, 1, Complex(1.0, -1.0)));
  EXPECT_EQ(p[0], Complex(2.0, 0.0));
  EXPECT_THROW(hadamard(a, ComplexImage(4, 8)), DimensionError);
}

TEST(Image, RejectsBadShapes) {
  EXPECT_THROW(RealImage(0, 4), DimensionError);
  EXPECT_THROW(RealImage(2, 2, std::vector<double>(3)), DimensionError);
}

TEST(Ptyt, RoundtripPreservesBits) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_complex(8, 4, rng);
    std::stringstream ss;
    write_ptyt(ss, to_tensor(c));
    EXPECT_EQ(complex_image_from(read_ptyt(ss)), c);

    const auto r = test_support::random_real(4, 16, rng, -5.0, 5.0);
    std::stringstream rs;
    write_ptyt(rs, to_tensor(r));
    EXPECT_EQ(real_image_from(read_ptyt(rs)), r);
  }
}

TEST(Ptyt, HeaderLayout) {
  std::stringstream ss;
  write_ptyt(ss, to_tensor(RealImage(2, 3, 1.0)));
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 2 * 4 + 6 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "PTYT");
  EXPECT_EQ(bytes[4], 0);
  EXPECT_EQ(bytes[5], 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 3);
  // 1.0 little-endian: 00 .. 00 f0 3f
  EXPECT_EQ(static_cast<unsigned char>(bytes[14 + 6]), 0xF0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[14 + 7]), 0x3F);
}

TEST(Ptyt, RejectsCorruptInput) {
  std::stringstream bad_magic("PTYX\x00\x02");
  EXPECT_THROW(read_ptyt(bad_magic), FormatError);
  std::stringstream full;
  write_ptyt(full, to_tensor(RealImage(4, 4, 0.5)));
  std::stringstream truncated(full.str().substr(0, full.str().size() - 3));
  EXPECT_THROW(read_ptyt(truncated), FormatError);
}
