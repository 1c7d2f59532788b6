// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "deepptych/error.hpp"
#include "deepptych/fft.hpp"
#include "deepptych/ptyt.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

struct PupilCenter {
  double row = 0.0;
  double col = 0.0;
};

/// Square coherent camera array. Centers are in centered Fourier coordinates,
/// i.e. the zero frequency sits at (image_size/2, image_size/2).
struct CameraArrayGeometry {
  std::size_t image_size = 0;
  std::size_t grid = 0;
  double aperture_diameter = 0.0;
  double overlap_frac = 0.0;
  double spacing = 0.0;
  std::vector<PupilCenter> centers;

  [[nodiscard]] std::size_t camera_count() const noexcept { return grid * grid; }
};

/// Lattice of grid x grid pupils around DC with spacing round(d * (1 - overlap)).
inline CameraArrayGeometry build_camera_array(std::size_t image_size, std::size_t grid,
                                              double aperture_diameter, double overlap_frac) {
  if (!is_power_of_two(image_size)) {
    throw GeometryError("image_size " + std::to_string(image_size) + " is not a power of two");
  }
  if (grid < 1) throw GeometryError("grid must be at least 1");
  if (!(aperture_diameter >= 1.0)) throw GeometryError("aperture_diameter must be >= 1");
  if (!(overlap_frac >= 0.0 && overlap_frac < 1.0)) throw GeometryError("overlap_frac must lie in [0, 1)");

  CameraArrayGeometry g;
  g.image_size = image_size;
  g.grid = grid;
  g.aperture_diameter = aperture_diameter;
  g.overlap_frac = overlap_frac;
  g.spacing = std::round(aperture_diameter * (1.0 - overlap_frac));

  const double span = static_cast<double>(grid - 1) * g.spacing + aperture_diameter;
  if (span > static_cast<double>(image_size)) {
    throw GeometryError("camera array spans " + std::to_string(span) +
                        " px; requires image_size >= " +
                        std::to_string(static_cast<std::size_t>(std::ceil(span))) + " (got " +
                        std::to_string(image_size) + ")");
  }

  const double dc = static_cast<double>(image_size / 2);
  const double mid = static_cast<double>(grid - 1) / 2.0;
  g.centers.reserve(grid * grid);
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      g.centers.push_back({dc + (static_cast<double>(i) - mid) * g.spacing,
                           dc + (static_cast<double>(j) - mid) * g.spacing});
    }
  }
  return g;
}

/// One camera whose pupil covers the whole Fourier plane: A = M (the identity
/// before subsampling). The builder's fit rule would reject this aperture, so
/// the geometry is assembled directly.
inline CameraArrayGeometry full_aperture_geometry(std::size_t image_size) {
  if (!is_power_of_two(image_size)) throw GeometryError("image_size must be a power of two");
  CameraArrayGeometry g;
  g.image_size = image_size;
  g.grid = 1;
  g.aperture_diameter = 2.0 * static_cast<double>(image_size);
  g.overlap_frac = 0.0;
  g.spacing = 0.0;
  const double dc = static_cast<double>(image_size / 2);
  g.centers.push_back({dc, dc});
  return g;
}

/// Binary disc for camera `index` (0-based) in centered Fourier coordinates.
inline RealImage pupil_mask(const CameraArrayGeometry& geometry, std::size_t index) {
  if (index >= geometry.camera_count()) {
    throw GeometryError("camera index " + std::to_string(index) + " out of range (L = " +
                        std::to_string(geometry.camera_count()) + ")");
  }
  const auto n = geometry.image_size;
  const auto [cr, cc] = geometry.centers[index];
  const double radius = geometry.aperture_diameter / 2.0;
  const double r2 = radius * radius;
  RealImage mask(n, n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dcol = static_cast<double>(c) - cc;
      if (dr * dr + dcol * dcol <= r2) mask(r, c) = 1.0;
    }
  }
  return mask;
}

/// Pixels retained by a camera's subsampling operator.
struct SamplingMask {
  std::size_t size = 0;
  std::vector<std::uint32_t> kept;  // sorted, unique flat indices
  double fraction = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<bool> dense() const {
    std::vector<bool> out(size * size, false);
    for (auto i : kept) out[i] = true;
    return out;
  }
};

/// Keeps the first round(fraction * size^2) entries of a seeded Fisher-Yates
/// permutation of the flat pixel indices.
inline SamplingMask sampling_mask(std::size_t size, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("sampling fraction " + std::to_string(fraction) + " outside (0, 1]");
  }
  const std::size_t n = size * size;
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0U);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < keep && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(keep);
  std::sort(perm.begin(), perm.end());
  return {size, std::move(perm), fraction, seed};
}

/// Seed of camera `index`'s stream: master + l with l counted from 1.
constexpr std::uint64_t camera_seed(std::uint64_t master, std::size_t index) noexcept {
  return master + static_cast<std::uint64_t>(index) + 1;
}

/// One independent mask per camera, seeded camera_seed(master_seed, l).
inline std::vector<SamplingMask> camera_masks(const CameraArrayGeometry& geometry, double fraction,
                                              std::uint64_t master_seed) {
  std::vector<SamplingMask> masks;
  masks.reserve(geometry.camera_count());
  for (std::size_t l = 0; l < geometry.camera_count(); ++l) {
    masks.push_back(sampling_mask(geometry.image_size, fraction, camera_seed(master_seed, l)));
  }
  return masks;
}

struct CameraMeasurement {
  RealImage magnitudes;  // zero at unsampled pixels
  SamplingMask mask;
};

struct Measurements {
  CameraArrayGeometry geometry;
  std::vector<CameraMeasurement> cameras;
  double noise_std = 0.0;
  std::uint64_t master_seed = 0;

  /// Percentage of retained samples over all n*L observed pixels.
  [[nodiscard]] double subsampling_percent() const {
    std::size_t kept = 0;
    for (const auto& cam : cameras) kept += cam.mask.kept.size();
    const double total = static_cast<double>(geometry.image_size * geometry.image_size * cameras.size());
    return static_cast<double>(kept) * 100.0 / total;
  }
};

/// The linear acquisition operators A_l = M_l F^-1 P_l o F of one camera
/// array with fixed masks. Pupils are stored in unshifted FFT order so the
/// centered mask application costs no extra shifts.
class AcquisitionModel {
 public:
  AcquisitionModel(CameraArrayGeometry geometry, std::vector<SamplingMask> masks)
      : geometry_(std::move(geometry)), masks_(std::move(masks)) {
    if (masks_.size() != geometry_.camera_count()) {
      throw DimensionError("expected " + std::to_string(geometry_.camera_count()) + " masks, got " +
                           std::to_string(masks_.size()));
    }
    pupils_.reserve(masks_.size());
    dense_masks_.reserve(masks_.size());
    for (std::size_t l = 0; l < masks_.size(); ++l) {
      if (masks_[l].size != geometry_.image_size) throw DimensionError("mask size does not match geometry");
      pupils_.push_back(ifftshift(pupil_mask(geometry_, l)));
      dense_masks_.push_back(masks_[l].dense());
    }
  }

  explicit AcquisitionModel(const Measurements& m) : AcquisitionModel(m.geometry, masks_of(m)) {}

  [[nodiscard]] const CameraArrayGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] std::size_t camera_count() const noexcept { return masks_.size(); }
  [[nodiscard]] const SamplingMask& mask(std::size_t l) const { return masks_.at(l); }
  [[nodiscard]] const RealImage& pupil(std::size_t l) const { return pupils_.at(l); }

  /// Field recorded by camera l before magnitude detection.
  [[nodiscard]] ComplexImage forward(const ComplexImage& x, std::size_t l) const {
    check_input(x);
    return camera_field(fft2(x), l);
  }

  /// Exact adjoint of forward.
  [[nodiscard]] ComplexImage adjoint(const ComplexImage& u, std::size_t l) const {
    check_input(u);
    ComplexImage masked(u.rows(), u.cols());
    for (auto i : masks_.at(l).kept) masked[i] = u[i];
    ComplexImage spectrum = fft2(masked);
    apply_pupil(spectrum, l);
    return ifft2(spectrum);
  }

  /// Band-limited field of camera l before subsampling, from fft2(x).
  [[nodiscard]] ComplexImage band_field(const ComplexImage& spectrum, std::size_t l) const {
    ComplexImage banded = spectrum;
    apply_pupil(banded, l);
    return ifft2(banded);
  }

  /// Same as forward, starting from a precomputed spectrum fft2(x).
  [[nodiscard]] ComplexImage camera_field(const ComplexImage& spectrum, std::size_t l) const {
    ComplexImage field = band_field(spectrum, l);
    const auto& keep = dense_masks_.at(l);
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (!keep[i]) field[i] = Complex(0.0, 0.0);
    }
    return field;
  }

  /// sum_l ||y_l - |A_l x|||^2 over sampled pixels.
  [[nodiscard]] double data_loss(const ComplexImage& x, const std::vector<RealImage>& y) const {
    check_measurements(y);
    const ComplexImage spectrum = fft2(x);
    double loss = 0.0;
    for (std::size_t l = 0; l < camera_count(); ++l) {
      const ComplexImage u = camera_field(spectrum, l);
      for (auto i : masks_[l].kept) {
        const double r = std::abs(u[i]) - y[l][i];
        loss += r * r;
      }
    }
    return loss;
  }

  struct LossAndGradient {
    double loss = 0.0;
    ComplexImage gradient;  // sum_l A_l^H ((|u_l| - y_l) o phase(u_l))
  };

  /// Data loss together with its conjugate Wirtinger gradient. Per-camera
  /// terms are accumulated in camera order.
  [[nodiscard]] LossAndGradient residual(const ComplexImage& x, const std::vector<RealImage>& y) const {
    check_input(x);
    check_measurements(y);
    const ComplexImage spectrum = fft2(x);
    ComplexImage accum(x.rows(), x.cols());
    double loss = 0.0;
    for (std::size_t l = 0; l < camera_count(); ++l) {
      const ComplexImage u = camera_field(spectrum, l);
      ComplexImage r(x.rows(), x.cols());
      for (auto i : masks_[l].kept) {
        const double mag = std::abs(u[i]);
        const double diff = mag - y[l][i];
        loss += diff * diff;
        r[i] = diff * unit_phase(u[i]);
      }
      const ComplexImage rs = fft2(r);
      const RealImage& p = pupils_[l];
      for (std::size_t i = 0; i < accum.size(); ++i) {
        if (p[i] != 0.0) accum[i] += rs[i];
      }
    }
    return {loss, ifft2(accum)};
  }

 private:
  static std::vector<SamplingMask> masks_of(const Measurements& m) {
    std::vector<SamplingMask> out;
    out.reserve(m.cameras.size());
    for (const auto& cam : m.cameras) out.push_back(cam.mask);
    return out;
  }

  void apply_pupil(ComplexImage& spectrum, std::size_t l) const {
    const RealImage& p = pupils_.at(l);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
      if (p[i] == 0.0) spectrum[i] = Complex(0.0, 0.0);
    }
  }

  void check_input(const ComplexImage& x) const {
    if (x.rows() != geometry_.image_size || x.cols() != geometry_.image_size) {
      throw DimensionError("field is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                           ", geometry expects " + std::to_string(geometry_.image_size));
    }
  }

  void check_measurements(const std::vector<RealImage>& y) const {
    if (y.size() != camera_count()) throw DimensionError("measurement count does not match camera count");
    for (const auto& img : y) {
      if (img.rows() != geometry_.image_size || img.cols() != geometry_.image_size) {
        throw DimensionError("measurement image does not match geometry");
      }
    }
  }

  CameraArrayGeometry geometry_;
  std::vector<SamplingMask> masks_;
  std::vector<RealImage> pupils_;
  std::vector<std::vector<bool>> dense_masks_;
};

inline std::vector<RealImage> magnitudes_of(const Measurements& m) {
  std::vector<RealImage> y;
  y.reserve(m.cameras.size());
  for (const auto& cam : m.cameras) y.push_back(cam.magnitudes);
  return y;
}

inline ComplexImage forward_linear(const ComplexImage& x, const CameraArrayGeometry& geometry,
                                   std::size_t l, const SamplingMask& mask) {
  if (l >= geometry.camera_count()) throw GeometryError("camera index out of range");
  if (mask.size != geometry.image_size) throw DimensionError("mask size does not match geometry");
  if (x.rows() != geometry.image_size || x.cols() != geometry.image_size) {
    throw DimensionError("forward_linear: field does not match geometry");
  }
  ComplexImage spectrum = fftshift(fft2(x));
  const RealImage p = pupil_mask(geometry, l);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= p[i];
  ComplexImage field = ifft2(ifftshift(spectrum));
  ComplexImage out(field.rows(), field.cols());
  for (auto i : mask.kept) out[i] = field[i];
  return out;
}

inline ComplexImage adjoint_linear(const ComplexImage& u, const CameraArrayGeometry& geometry,
                                   std::size_t l, const SamplingMask& mask) {
  if (l >= geometry.camera_count()) throw GeometryError("camera index out of range");
  if (mask.size != geometry.image_size) throw DimensionError("mask size does not match geometry");
  if (u.rows() != geometry.image_size || u.cols() != geometry.image_size) {
    throw DimensionError("adjoint_linear: field does not match geometry");
  }
  ComplexImage masked(u.rows(), u.cols());
  for (auto i : mask.kept) masked[i] = u[i];
  ComplexImage spectrum = fftshift(fft2(masked));
  const RealImage p = pupil_mask(geometry, l);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= p[i];
  return ifft2(ifftshift(spectrum));
}

/// y_l = |A_l x| + n_l at sampled pixels, Gaussian noise drawn from the
/// camera_seed(seed, l) stream in ascending pixel order, clamped at 0.
inline Measurements measure(const RealImage& x, const CameraArrayGeometry& geometry,
                            const std::vector<SamplingMask>& masks, double noise_std,
                            std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  const AcquisitionModel model(geometry, masks);
  if (x.rows() != geometry.image_size || x.cols() != geometry.image_size) {
    throw DimensionError("measure: image does not match geometry");
  }
  const ComplexImage spectrum = fft2(to_complex(x));
  Measurements m;
  m.geometry = geometry;
  m.noise_std = noise_std;
  m.master_seed = seed;
  m.cameras.reserve(masks.size());
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const ComplexImage u = model.camera_field(spectrum, l);
    RealImage y(x.rows(), x.cols(), 0.0);
    SplitMix64 rng(camera_seed(seed, l));
    for (auto i : masks[l].kept) {
      double v = std::abs(u[i]);
      if (noise_std > 0.0) v = std::max(0.0, v + noise_std * rng.gaussian());
      y[i] = v;
    }
    m.cameras.push_back({std::move(y), masks[l]});
  }
  return m;
}

/// Conjugate Wirtinger gradient of sum_l ||y_l - |A_l x|||^2. For a real
/// perturbation d the loss changes by 2 Re<g, d>.
inline ComplexImage residual_gradient(const ComplexImage& x, const Measurements& m) {
  const AcquisitionModel model(m);
  return model.residual(x, magnitudes_of(m)).gradient;
}

// Measurement bundle layout (all little-endian):
//   "PTYM" u32 version=1
//   u32 image_size, u32 grid, f64 aperture_diameter, f64 overlap_frac,
//   f64 noise_std, u64 master_seed, u32 L
//   L x { f64 fraction, u64 mask_seed, PTYT real64 [n, n] magnitudes,
//         u32 count, count x u32 kept indices }

inline constexpr std::array<char, 4> kMeasurementMagic{'P', 'T', 'Y', 'M'};

inline void write_measurements(std::ostream& os, const Measurements& m) {
  os.write(kMeasurementMagic.data(), kMeasurementMagic.size());
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(m.geometry.image_size));
  io::write_u32(os, static_cast<std::uint32_t>(m.geometry.grid));
  io::write_f64(os, m.geometry.aperture_diameter);
  io::write_f64(os, m.geometry.overlap_frac);
  io::write_f64(os, m.noise_std);
  io::write_u64(os, m.master_seed);
  io::write_u32(os, static_cast<std::uint32_t>(m.cameras.size()));
  for (const auto& cam : m.cameras) {
    io::write_f64(os, cam.mask.fraction);
    io::write_u64(os, cam.mask.seed);
    write_ptyt(os, to_tensor(cam.magnitudes));
    io::write_u32(os, static_cast<std::uint32_t>(cam.mask.kept.size()));
    for (auto i : cam.mask.kept) io::write_u32(os, i);
  }
}

inline Measurements read_measurements(std::istream& is) {
  io::expect_magic(is, kMeasurementMagic, "measurement");
  const auto version = io::read_u32(is, "version");
  if (version != 1) throw FormatError("unsupported measurement version " + std::to_string(version));
  const auto size = io::read_u32(is, "image_size");
  const auto grid = io::read_u32(is, "grid");
  const double diameter = io::read_f64(is, "aperture_diameter");
  const double overlap = io::read_f64(is, "overlap_frac");
  Measurements m;
  try {
    const bool full_aperture = grid == 1 && diameter == 2.0 * size && is_power_of_two(size);
    m.geometry = full_aperture ? full_aperture_geometry(size) : build_camera_array(size, grid, diameter, overlap);
  } catch (const GeometryError& e) {
    throw FormatError(std::string("invalid geometry in measurement file: ") + e.what());
  }
  m.noise_std = io::read_f64(is, "noise_std");
  m.master_seed = io::read_u64(is, "master_seed");
  const auto count = io::read_u32(is, "camera count");
  if (count != m.geometry.camera_count()) throw FormatError("camera count does not match geometry");
  for (std::uint32_t l = 0; l < count; ++l) {
    CameraMeasurement cam;
    cam.mask.size = size;
    cam.mask.fraction = io::read_f64(is, "fraction");
    cam.mask.seed = io::read_u64(is, "mask seed");
    cam.magnitudes = real_image_from(read_ptyt(is));
    if (cam.magnitudes.rows() != size || cam.magnitudes.cols() != size) {
      throw FormatError("measurement image does not match geometry");
    }
    const auto kept = io::read_u32(is, "kept count");
    if (kept > std::size_t{size} * size) throw FormatError("kept count exceeds image size");
    cam.mask.kept.resize(kept);
    for (auto& i : cam.mask.kept) {
      i = io::read_u32(is, "kept index");
      if (i >= std::size_t{size} * size) throw FormatError("kept index out of range");
    }
    m.cameras.push_back(std::move(cam));
  }
  return m;
}

inline void save_measurements(const std::filesystem::path& path, const Measurements& m) {
  auto os = io::open_output(path);
  write_measurements(os, m);
  if (!os) throw FormatError("failed writing " + path.string());
}

inline Measurements load_measurements(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_measurements(is);
}

}  // namespace deepptych
