#pragma once

// Even (cosine-phase) Gabor bank at three scales and two orientations, and the
// per-pixel gradient direction/magnitude fields derived from its responses.
//
// Coordinates: `row` grows downward, `col` grows to the right. Direction and
// magnitude finite differences follow the (row, col) indexing of the
// descriptor's equations, where the second index is the horizontal one.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "psltd/image.hpp"

namespace psltd {

enum class GaborOrientation { deg0 = 0, deg90 = 1 };

struct GaborConfig {
  double lambda0 = 4.0;        // wavelength at scale 0, pixels
  double ratio = 2.0;          // wavelength ratio between consecutive scales
  int kernel_size = 10;        // taps per side
  double sigma_factor = 0.56;  // envelope sigma as a fraction of wavelength
  int scales = 3;

  void validate() const {
    if (!(lambda0 > 0.0)) throw ConfigError("gabor.lambda0 must be positive");
    if (!(ratio > 1.0)) throw ConfigError("gabor.ratio must exceed 1");
    if (kernel_size < 2) throw ConfigError("gabor.kernel_size must be at least 2");
    if (scales < 1) throw ConfigError("gabor: at least one scale required");
  }
};

/// Square tap array, row-major.
struct GaborKernel {
  int size = 0;
  double wavelength = 0.0;
  double sigma = 0.0;
  std::vector<double> taps;

  double at(int row, int col) const { return taps[static_cast<std::size_t>(row) * size + col]; }
};

class GaborBank {
public:
  GaborBank() = default;
  explicit GaborBank(std::vector<GaborKernel> kernels, int scales)
      : kernels_(std::move(kernels)), scales_(scales) {}

  int scales() const noexcept { return scales_; }
  int kernel_size() const noexcept { return kernels_.empty() ? 0 : kernels_.front().size; }
  std::size_t size() const noexcept { return kernels_.size(); }

  const GaborKernel& kernel(int m, GaborOrientation o) const {
    return kernels_.at(static_cast<std::size_t>(m) * 2 + static_cast<int>(o));
  }

private:
  std::vector<GaborKernel> kernels_;
  int scales_ = 0;
};

/// Wavelength lambda0 * ratio^m, sigma = sigma_factor * wavelength; taps
/// sampled about the grid centre, mean-subtracted then L2-normalized. The 90
/// degree kernel is the transpose of the 0 degree one.
inline GaborBank build_bank(const GaborConfig& config = {}) {
  config.validate();
  const int n = config.kernel_size;
  const double centre = (n - 1) / 2.0;
  std::vector<GaborKernel> kernels;
  for (int m = 0; m < config.scales; ++m) {
    GaborKernel k0;
    k0.size = n;
    k0.wavelength = config.lambda0 * std::pow(config.ratio, m);
    k0.sigma = config.sigma_factor * k0.wavelength;
    k0.taps.resize(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double x = c - centre;
        const double y = r - centre;
        const double envelope = std::exp(-(x * x + y * y) / (2.0 * k0.sigma * k0.sigma));
        k0.taps[static_cast<std::size_t>(r) * n + c] =
            envelope * std::cos(2.0 * std::numbers::pi * x / k0.wavelength);
      }
    }
    double mean = 0.0;
    for (double t : k0.taps) mean += t;
    mean /= static_cast<double>(k0.taps.size());
    double norm = 0.0;
    for (double& t : k0.taps) {
      t -= mean;
      norm += t * t;
    }
    norm = std::sqrt(norm);
    for (double& t : k0.taps) t /= norm;

    GaborKernel k90 = k0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        k90.taps[static_cast<std::size_t>(r) * n + c] = k0.taps[static_cast<std::size_t>(c) * n + r];
    kernels.push_back(std::move(k0));
    kernels.push_back(std::move(k90));
  }
  return GaborBank(std::move(kernels), config.scales);
}

struct RealPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  RealPlane() = default;
  RealPlane(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }

  /// Replicate-clamped access.
  double clamped(int row, int col) const {
    return at(std::clamp(row, 0, height - 1), std::clamp(col, 0, width - 1));
  }
};

/// Response planes, one per (scale, orientation).
struct GaborField {
  int scales = 0;
  std::vector<RealPlane> planes;

  const RealPlane& plane(int m, GaborOrientation o) const {
    return planes.at(static_cast<std::size_t>(m) * 2 + static_cast<int>(o));
  }
  int width() const { return planes.empty() ? 0 : planes.front().width; }
  int height() const { return planes.empty() ? 0 : planes.front().height; }
};

/// Same-size convolution with replicate borders:
///   out(r, c) = sum_{i,j} k(i, j) * I(clamp(r - i + n/2), clamp(c - j + n/2)).
/// The crop minimum is subtracted (in integers) before the cast to real; the
/// kernels are DC-free, so this leaves the response unchanged analytically and
/// makes it exactly invariant to constant intensity offsets.
inline GaborField apply_bank(const GrayImage& crop, const GaborBank& bank) {
  const int w = crop.width(), h = crop.height();
  const int n = bank.kernel_size();
  const int anchor = n / 2;
  const int pw = w + 2 * anchor;
  const int ph = h + 2 * anchor;

  const std::uint16_t lowest =
      crop.samples().empty() ? 0 : *std::min_element(crop.samples().begin(), crop.samples().end());
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  for (int pr = 0; pr < ph; ++pr) {
    const int r = std::clamp(pr - anchor, 0, h - 1);
    for (int pc = 0; pc < pw; ++pc) {
      const int c = std::clamp(pc - anchor, 0, w - 1);
      padded[static_cast<std::size_t>(pr) * pw + pc] =
          static_cast<double>(static_cast<int>(crop.at(r, c)) - static_cast<int>(lowest));
    }
  }
  // padded(pr, pc) = I(clamp(pr - anchor), clamp(pc - anchor)), so
  // I(r - i + anchor, ...) lives at padded(r - i + 2*anchor, ...).
  GaborField field;
  field.scales = bank.scales();
  for (int m = 0; m < bank.scales(); ++m) {
    for (auto o : {GaborOrientation::deg0, GaborOrientation::deg90}) {
      const GaborKernel& k = bank.kernel(m, o);
      RealPlane out(w, h);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i) {
            const double* prow = &padded[static_cast<std::size_t>(r - i + 2 * anchor) * pw];
            const double* krow = &k.taps[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) acc += krow[j] * prow[c - j + 2 * anchor];
          }
          out.at(r, c) = acc;
        }
      }
      field.planes.push_back(std::move(out));
    }
  }
  return field;
}

enum class MagIndexMode {
  as_printed,  // 90-degree difference taken along the horizontal axis
  symmetric,   // 90-degree difference taken along the vertical axis, as in the direction
};

/// Direction in [0, pi/2]: atan(|dPsi0 horizontal| / |dPsi90 vertical|) with
/// 0/0 -> 0 and x/0 -> pi/2. Out-of-range neighbours are replicate-clamped.
inline double gradient_direction(const GaborField& field, int m, int row, int col) {
  const RealPlane& p0 = field.plane(m, GaborOrientation::deg0);
  const RealPlane& p90 = field.plane(m, GaborOrientation::deg90);
  const double num = std::abs(p0.clamped(row, col + 1) - p0.clamped(row, col));
  const double den = std::abs(p90.clamped(row - 1, col) - p90.clamped(row, col));
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numbers::pi / 2.0;
  return std::atan(num / den);
}

inline double gradient_magnitude(const GaborField& field, int m, int row, int col,
                                 MagIndexMode mode = MagIndexMode::as_printed) {
  const RealPlane& p0 = field.plane(m, GaborOrientation::deg0);
  const RealPlane& p90 = field.plane(m, GaborOrientation::deg90);
  const double d0 = std::abs(p0.clamped(row, col + 1) - p0.clamped(row, col));
  const double d90 = mode == MagIndexMode::as_printed
                         ? std::abs(p90.clamped(row, col + 1) - p90.clamped(row, col))
                         : std::abs(p90.clamped(row - 1, col) - p90.clamped(row, col));
  return std::sqrt(d0 * d0 + d90 * d90);
}

/// Whole-crop direction and magnitude maps for every scale.
struct GradientMaps {
  std::vector<RealPlane> direction;
  std::vector<RealPlane> magnitude;
};

inline GradientMaps gradient_maps(const GaborField& field, MagIndexMode mode) {
  GradientMaps maps;
  const int w = field.width(), h = field.height();
  for (int m = 0; m < field.scales; ++m) {
    RealPlane dir(w, h), mag(w, h);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        dir.at(r, c) = gradient_direction(field, m, r, c);
        mag.at(r, c) = gradient_magnitude(field, m, r, c, mode);
      }
    }
    maps.direction.push_back(std::move(dir));
    maps.magnitude.push_back(std::move(mag));
  }
  return maps;
}

}  // namespace psltd
