#pragma once

// 3x3 neighbourhood encodings: penta-pattern quantization, its binary slices,
// uniform-pattern binning, linear-structure orientation vectors and the
// gradient-magnitude sign pattern.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "psltd/gabor.hpp"
#include "psltd/image.hpp"

namespace psltd {

inline constexpr int kNeighbours = 8;
inline constexpr int kLevels = 5;
inline constexpr int kOrientations = 5;
inline constexpr int kUniformPatterns = 58;
inline constexpr int kBins = 59;

struct Offset {
  int drow;
  int dcol;
};

// q_0..q_7: east, then counter-clockwise (north is row - 1).
inline constexpr std::array<Offset, kNeighbours> kNeighbourOffsets{{
    {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1},
}};

using PentaPattern = std::array<std::uint8_t, kNeighbours>;

/// 8-bit pattern, bit n holds neighbour q_n.
using BinaryPattern = std::uint8_t;

/// Five-level quantization of a centre-minus-neighbour difference.
constexpr std::uint8_t penta_level(double diff, double t0, double t1) noexcept {
  if (diff >= t1) return 3;
  if (diff <= -t1) return 4;
  if (diff >= t0) return 1;
  if (diff <= -t0) return 2;
  return 0;
}

/// `row`/`col` must be interior (one-pixel margin).
inline PentaPattern compute_ppv(const GrayImage& crop, int row, int col, double t0, double t1) {
  PentaPattern ppv{};
  const double centre = crop.at(row, col);
  for (int n = 0; n < kNeighbours; ++n) {
    const auto [dr, dc] = kNeighbourOffsets[n];
    ppv[n] = penta_level(centre - crop.at(row + dr, col + dc), t0, t1);
  }
  return ppv;
}

inline std::array<BinaryPattern, kLevels> ppv_to_bpvs(const PentaPattern& ppv) noexcept {
  std::array<BinaryPattern, kLevels> bpvs{};
  for (int n = 0; n < kNeighbours; ++n)
    bpvs[ppv[n]] = static_cast<BinaryPattern>(bpvs[ppv[n]] | (1u << n));
  return bpvs;
}

/// Number of circular 0/1 transitions.
constexpr int uniformity(BinaryPattern b) noexcept {
  return std::popcount(static_cast<std::uint8_t>(b ^ std::rotr(b, 1)));
}

namespace detail {
constexpr std::array<std::uint8_t, 256> make_bin_table() {
  std::array<std::uint8_t, 256> table{};
  std::uint8_t rank = 0;
  for (int v = 0; v < 256; ++v)
    table[v] = uniformity(static_cast<BinaryPattern>(v)) <= 2 ? rank++ : kUniformPatterns;
  return table;
}
inline constexpr auto kBinTable = make_bin_table();
}  // namespace detail

/// Rank among the 58 uniform patterns in increasing value; 58 for the rest.
constexpr int bin_index(BinaryPattern b) noexcept { return detail::kBinTable[b]; }

/// Slot l in 0..3 holds l + 1 when the structure is present, else 0; slot 4 is
/// 1 exactly when none of slots 0..3 is present.
struct OrientationVector {
  std::array<std::uint8_t, kOrientations> e{};

  static OrientationVector from_presence(std::uint8_t mask4) noexcept {
    OrientationVector v;
    for (int l = 0; l < 4; ++l) v.e[l] = (mask4 >> l) & 1u ? static_cast<std::uint8_t>(l + 1) : 0;
    v.e[4] = (mask4 & 0xf) == 0 ? 1 : 0;
    return v;
  }

  bool present(int l) const noexcept { return e[l] != 0; }

  /// Bit l set when orientation l counts toward a histogram. Literal mode
  /// fires only on slots holding the value 1.
  std::uint8_t fire_mask(bool literal) const noexcept {
    std::uint8_t mask = 0;
    for (int l = 0; l < kOrientations; ++l)
      if (literal ? e[l] == 1 : e[l] != 0) mask = static_cast<std::uint8_t>(mask | (1u << l));
    return mask;
  }

  friend bool operator==(const OrientationVector&, const OrientationVector&) = default;
};

// Line pairs through the centre for 0, 90, 45 and 135 degrees.
inline constexpr std::array<std::array<Offset, 2>, 4> kLineOffsets{{
    {{{0, -1}, {0, 1}}},
    {{{-1, 0}, {1, 0}}},
    {{{1, -1}, {-1, 1}}},
    {{{-1, -1}, {1, 1}}},
}};

template <typename Sample>
std::uint8_t line_presence(Sample&& sample, int row, int col, double threshold) {
  const double centre = sample(row, col);
  std::uint8_t mask = 0;
  for (int l = 0; l < 4; ++l) {
    const auto& [a, b] = kLineOffsets[l];
    if (std::abs(centre - sample(row + a.drow, col + a.dcol)) <= threshold &&
        std::abs(centre - sample(row + b.drow, col + b.dcol)) <= threshold)
      mask = static_cast<std::uint8_t>(mask | (1u << l));
  }
  return mask;
}

inline OrientationVector intensity_orientation(const GrayImage& crop, int row, int col, double t0) {
  return OrientationVector::from_presence(line_presence(
      [&](int r, int c) { return static_cast<double>(crop.at(r, c)); }, row, col, t0));
}

/// G0 is given in degrees on the [0, 90] scale of the direction field.
inline double angle_threshold(double g0_degrees) noexcept {
  return g0_degrees / 90.0 * (std::numbers::pi / 2.0);
}

inline OrientationVector gradient_orientation(const RealPlane& direction, int row, int col,
                                              double g0_degrees) {
  return OrientationVector::from_presence(
      line_presence([&](int r, int c) { return direction.clamped(r, c); }, row, col,
                    angle_threshold(g0_degrees)));
}

inline OrientationVector gradient_orientation(const GaborField& field, int m, int row, int col,
                                              double g0_degrees) {
  return OrientationVector::from_presence(line_presence(
      [&](int r, int c) {
        return gradient_direction(field, m, std::clamp(r, 0, field.height() - 1),
                                  std::clamp(c, 0, field.width() - 1));
      },
      row, col, angle_threshold(g0_degrees)));
}

inline OrientationVector combined_orientation(const OrientationVector& ei,
                                              const OrientationVector& eg) noexcept {
  std::uint8_t mask = 0;
  for (int l = 0; l < 4; ++l)
    if (ei.e[l] == eg.e[l] && ei.e[l] != 0) mask = static_cast<std::uint8_t>(mask | (1u << l));
  return OrientationVector::from_presence(mask);
}

/// Bit n = 1 when Mag(q_n) >= Mag(p).
inline BinaryPattern magnitude_pattern(const RealPlane& magnitude, int row, int col) {
  const double centre = magnitude.clamped(row, col);
  BinaryPattern bits = 0;
  for (int n = 0; n < kNeighbours; ++n) {
    const auto [dr, dc] = kNeighbourOffsets[n];
    if (magnitude.clamped(row + dr, col + dc) - centre >= 0.0)
      bits = static_cast<BinaryPattern>(bits | (1u << n));
  }
  return bits;
}

inline BinaryPattern magnitude_pattern(const GaborField& field, int m, int row, int col,
                                       MagIndexMode mode = MagIndexMode::as_printed) {
  auto mag = [&](int r, int c) {
    return gradient_magnitude(field, m, std::clamp(r, 0, field.height() - 1),
                              std::clamp(c, 0, field.width() - 1), mode);
  };
  const double centre = mag(row, col);
  BinaryPattern bits = 0;
  for (int n = 0; n < kNeighbours; ++n) {
    const auto [dr, dc] = kNeighbourOffsets[n];
    if (mag(row + dr, col + dc) - centre >= 0.0) bits = static_cast<BinaryPattern>(bits | (1u << n));
  }
  return bits;
}

}  // namespace psltd
