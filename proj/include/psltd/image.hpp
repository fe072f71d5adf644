#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psltd/error.hpp"

namespace psltd {

/// Bit-depth-tagged grayscale raster stored row-major. Every sample is
/// strictly below 2^bit_depth; dimensions are at least 1x1 unless the image
/// is default-constructed (empty).
class GrayImage {
public:
  GrayImage() = default;

  GrayImage(int width, int height, int bit_depth, std::uint16_t fill = 0)
      : GrayImage(width, height, bit_depth,
                  std::vector<std::uint16_t>(checked_area(width, height), fill)) {}

  GrayImage(int width, int height, int bit_depth, std::vector<std::uint16_t> samples)
      : width_(width), height_(height), bit_depth_(bit_depth), samples_(std::move(samples)) {
    if (bit_depth != 8 && bit_depth != 16)
      throw DataError("unsupported bit depth " + std::to_string(bit_depth));
    if (samples_.size() != checked_area(width, height))
      throw DataError("sample count does not match image dimensions");
    for (auto s : samples_)
      if (s > max_value()) throw DataError("sample exceeds bit depth");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int bit_depth() const noexcept { return bit_depth_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::uint32_t max_value() const noexcept { return (1u << bit_depth_) - 1u; }

  std::uint16_t at(int row, int col) const noexcept {
    return samples_[static_cast<std::size_t>(row) * width_ + col];
  }

  void set(int row, int col, std::uint32_t v) {
    if (v > max_value()) throw DataError("sample exceeds bit depth");
    samples_[static_cast<std::size_t>(row) * width_ + col] = static_cast<std::uint16_t>(v);
  }

  std::span<const std::uint16_t> samples() const noexcept { return samples_; }

  /// Sub-rectangle copy; x0/y0 are column/row of the top-left corner.
  GrayImage crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ || y0 + h > height_)
      throw DataError("crop rectangle outside image");
    std::vector<std::uint16_t> out(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        out[static_cast<std::size_t>(r) * w + c] = at(y0 + r, x0 + c);
    return GrayImage(w, h, bit_depth_, std::move(out));
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
  static std::size_t checked_area(int width, int height) {
    if (width < 1 || height < 1) throw DataError("image dimensions must be at least 1x1");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  int bit_depth_ = 8;
  std::vector<std::uint16_t> samples_;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int row, int col) const noexcept {
    return bits[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set(int row, int col, bool v) noexcept {
    bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
  }
  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

}  // namespace psltd
