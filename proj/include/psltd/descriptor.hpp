#pragma once

// Printer-specific local texture descriptor: 10856 reals laid out as
//   F1 = intensity block (1475) | magnitude histograms m=0..2 (3 x 59)
//   F2 = gradient blocks m=0..2 (3 x 1475) | magnitude histograms (3 x 59)
//   F3 = combined blocks m=0..2 (3 x 1475) | magnitude histograms (3 x 59)
// Each 1475 block is ordered orientation l (outer), level k, bin d (inner).

#include <array>
#include <span>
#include <string>
#include <vector>

#include "psltd/gabor.hpp"
#include "psltd/imaging.hpp"
#include "psltd/patterns.hpp"

namespace psltd {

inline constexpr int kScales = 3;
inline constexpr int kBlockDim = kOrientations * kLevels * kBins;  // 1475
inline constexpr int kMagnitudeDim = kScales * kBins;              // 177
inline constexpr int kF1Dim = kBlockDim + kMagnitudeDim;           // 1652
inline constexpr int kF2Dim = kScales * kBlockDim + kMagnitudeDim; // 4602
inline constexpr int kF3Dim = kF2Dim;
inline constexpr int kPsltdDim = kF1Dim + kF2Dim + kF3Dim;         // 10856
static_assert(kPsltdDim == 4602 * 2 + 1475 + 59 * 3);

struct DescriptorParams {
  double t0 = 20.0;  // intensity dead zone
  double t1 = 80.0;  // strong-difference threshold
  double g0 = 90.0;  // direction similarity, degrees on the [0, 90] scale
  bool eq18_literal = false;
  MagIndexMode mag_mode = MagIndexMode::as_printed;

  static DescriptorParams for_bit_depth(int bit_depth) {
    DescriptorParams p;
    if (bit_depth == 16) {
      p.t0 = 13000.0;
      p.t1 = 50000.0;
    } else if (bit_depth != 8) {
      throw ConfigError("descriptor: unsupported bit depth " + std::to_string(bit_depth));
    }
    return p;
  }

  void validate() const {
    if (!(t0 > 0.0 && t0 < t1)) throw ConfigError("descriptor: require 0 < T0 < T1");
    if (!(g0 >= 0.0)) throw ConfigError("descriptor: G0 must be non-negative");
  }
};

enum class FeatureSet { f1 = 0, f2 = 1, f3 = 2 };
enum class StructureMode { intensity, gradient, combined };

class Psltd {
public:
  Psltd() : values_(kPsltdDim, 0.0) {}

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> f1() const noexcept { return {values_.data(), kF1Dim}; }
  std::span<const double> f2() const noexcept { return {values_.data() + kF1Dim, kF2Dim}; }
  std::span<const double> f3() const noexcept {
    return {values_.data() + kF1Dim + kF2Dim, kF3Dim};
  }

  static constexpr int set_offset(FeatureSet set) noexcept {
    switch (set) {
      case FeatureSet::f1: return 0;
      case FeatureSet::f2: return kF1Dim;
      case FeatureSet::f3: return kF1Dim + kF2Dim;
    }
    return 0;
  }

  /// Flat index of histogram bin d for (orientation l, level k) in the block
  /// of scale m. F1 has a single scale-free block; pass m = 0.
  static constexpr int block_index(FeatureSet set, int m, int l, int k, int d) noexcept {
    return set_offset(set) + m * kBlockDim + (l * kLevels + k) * kBins + d;
  }

  static constexpr int magnitude_index(FeatureSet set, int m, int d) noexcept {
    const int blocks = set == FeatureSet::f1 ? 1 : kScales;
    return set_offset(set) + blocks * kBlockDim + m * kBins + d;
  }

  std::vector<double> release() && { return std::move(values_); }

private:
  std::vector<double> values_;
};

/// Per-interior-pixel codes shared by every histogram of one crop.
struct CropCodes {
  int interior = 0;
  std::vector<std::array<std::uint8_t, kLevels>> level_bins;  // bin_index(BPV_k)
  std::vector<std::uint8_t> intensity_fire;
  std::array<std::vector<std::uint8_t>, kScales> gradient_fire;
  std::array<std::vector<std::uint8_t>, kScales> combined_fire;
  std::array<std::vector<std::uint8_t>, kScales> magnitude_bins;
};

inline CropCodes encode_crop(const GrayImage& crop, const GaborField& field,
                             const DescriptorParams& params) {
  CropCodes codes;
  const int w = crop.width(), h = crop.height();
  if (w < 3 || h < 3) return codes;
  const GradientMaps maps = gradient_maps(field, params.mag_mode);
  const int n = (w - 2) * (h - 2);
  codes.interior = n;
  codes.level_bins.reserve(n);
  codes.intensity_fire.reserve(n);
  for (int m = 0; m < kScales; ++m) {
    codes.gradient_fire[m].reserve(n);
    codes.combined_fire[m].reserve(n);
    codes.magnitude_bins[m].reserve(n);
  }
  for (int r = 1; r < h - 1; ++r) {
    for (int c = 1; c < w - 1; ++c) {
      const auto bpvs = ppv_to_bpvs(compute_ppv(crop, r, c, params.t0, params.t1));
      std::array<std::uint8_t, kLevels> bins{};
      for (int k = 0; k < kLevels; ++k) bins[k] = static_cast<std::uint8_t>(bin_index(bpvs[k]));
      codes.level_bins.push_back(bins);

      const OrientationVector ei = intensity_orientation(crop, r, c, params.t0);
      codes.intensity_fire.push_back(ei.fire_mask(params.eq18_literal));
      for (int m = 0; m < kScales; ++m) {
        const OrientationVector eg = gradient_orientation(maps.direction[m], r, c, params.g0);
        codes.gradient_fire[m].push_back(eg.fire_mask(params.eq18_literal));
        codes.combined_fire[m].push_back(
            combined_orientation(ei, eg).fire_mask(params.eq18_literal));
        codes.magnitude_bins[m].push_back(
            static_cast<std::uint8_t>(bin_index(magnitude_pattern(maps.magnitude[m], r, c))));
      }
    }
  }
  return codes;
}

namespace detail {

inline void fill_block(const CropCodes& codes, const std::vector<std::uint8_t>& fire,
                       std::span<double> out) {
  std::array<std::array<std::uint32_t, kBins>, kOrientations * kLevels> counts{};
  for (int p = 0; p < codes.interior; ++p) {
    const std::uint8_t mask = fire[p];
    if (!mask) continue;
    for (int l = 0; l < kOrientations; ++l) {
      if (!((mask >> l) & 1u)) continue;
      for (int k = 0; k < kLevels; ++k) ++counts[l * kLevels + k][codes.level_bins[p][k]];
    }
  }
  for (int lk = 0; lk < kOrientations * kLevels; ++lk) {
    std::uint32_t total = 0;
    for (auto v : counts[lk]) total += v;
    for (int d = 0; d < kBins; ++d)
      out[lk * kBins + d] = total ? static_cast<double>(counts[lk][d]) / total : 0.0;
  }
}

inline void fill_magnitude(const std::vector<std::uint8_t>& bins, std::span<double> out) {
  std::array<std::uint32_t, kBins> counts{};
  for (auto b : bins) ++counts[b];
  const auto total = static_cast<std::uint32_t>(bins.size());
  for (int d = 0; d < kBins; ++d)
    out[d] = total ? static_cast<double>(counts[d]) / total : 0.0;
}

}  // namespace detail

/// One 5 x 5 x 59 block. `m` is ignored in intensity mode.
inline std::vector<double> histogram_block(const GrayImage& crop, const GaborField& field,
                                           StructureMode mode, int m,
                                           const DescriptorParams& params) {
  std::vector<double> block(kBlockDim, 0.0);
  if (crop.width() < 3 || crop.height() < 3) {
    log::warn("histogram_block: crop smaller than 3x3, returning an empty block");
    return block;
  }
  const CropCodes codes = encode_crop(crop, field, params);
  const auto& fire = mode == StructureMode::intensity  ? codes.intensity_fire
                     : mode == StructureMode::gradient ? codes.gradient_fire.at(m)
                                                       : codes.combined_fire.at(m);
  detail::fill_block(codes, fire, block);
  return block;
}

inline Psltd compute_psltd(const GrayImage& crop, const GaborBank& bank,
                           const DescriptorParams& params) {
  if (crop.width() < 3 || crop.height() < 3)
    throw DataError("compute_psltd: crop must be at least 3x3");
  if (bank.scales() != kScales) throw ConfigError("compute_psltd: bank must have 3 scales");
  const GaborField field = apply_bank(crop, bank);
  const CropCodes codes = encode_crop(crop, field, params);

  Psltd out;
  auto values = out.values();
  auto slice = [&](int offset, int len) { return values.subspan(offset, len); };

  detail::fill_block(codes, codes.intensity_fire,
                     slice(Psltd::block_index(FeatureSet::f1, 0, 0, 0, 0), kBlockDim));
  for (int m = 0; m < kScales; ++m) {
    detail::fill_block(codes, codes.gradient_fire[m],
                       slice(Psltd::block_index(FeatureSet::f2, m, 0, 0, 0), kBlockDim));
    detail::fill_block(codes, codes.combined_fire[m],
                       slice(Psltd::block_index(FeatureSet::f3, m, 0, 0, 0), kBlockDim));
  }
  for (auto set : {FeatureSet::f1, FeatureSet::f2, FeatureSet::f3})
    for (int m = 0; m < kScales; ++m)
      detail::fill_magnitude(codes.magnitude_bins[m],
                             slice(Psltd::magnitude_index(set, m, 0), kBins));
  return out;
}

inline Psltd compute_psltd(const Component& component, const GaborBank& bank,
                           const DescriptorParams& params) {
  return compute_psltd(component.crop, bank, params);
}

}  // namespace psltd
