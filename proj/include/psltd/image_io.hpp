#pragma once

// PNG (8/16-bit) and binary PGM (P5) reading and writing.

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "psltd/image.hpp"

namespace psltd {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint16_t bt601_luma(std::uint32_t r, std::uint32_t g, std::uint32_t b) {
  return static_cast<std::uint16_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

inline GrayImage read_png(const std::filesystem::path& path, bool luma) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);

  const bool gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  if (!gray && !luma) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("color image rejected (use --luma): " + path.string());
  }

  std::vector<std::uint16_t> samples(static_cast<std::size_t>(w) * h);
  auto sample = [&](png_bytep row, int col, int ch) -> std::uint32_t {
    const int idx = col * channels + ch;
    if (depth == 16) return (static_cast<std::uint32_t>(row[2 * idx]) << 8) | row[2 * idx + 1];
    return row[idx];
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::uint32_t v = gray ? sample(rows[r], c, 0)
                             : bt601_luma(sample(rows[r], c, 0), sample(rows[r], c, 1),
                                          sample(rows[r], c, 2));
      samples[static_cast<std::size_t>(r) * w + c] = static_cast<std::uint16_t>(v);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return GrayImage(w, h, depth == 16 ? 16 : 8, std::move(samples));
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("not a binary PGM: " + path.string());
  auto next_int = [&]() {
    int v = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      break;
    }
    if (!(in >> v)) throw DataError("truncated PGM header: " + path.string());
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  in.get();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw DataError("bad PGM header: " + path.string());
  const bool wide = maxval > 255;
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> buf(samples.size() * (wide ? 2 : 1));
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw DataError("truncated PGM data: " + path.string());
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = wide ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
  return GrayImage(w, h, wide ? 16 : 8, std::move(samples));
}

}  // namespace detail

/// Loads a PNG or P5 PGM. Color PNGs are rejected unless `luma` requests
/// BT.601 luma conversion.
inline GrayImage load_image(const std::filesystem::path& path, bool luma = false) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return detail::read_png(path, luma);
  if (sig[0] == 'P' && sig[1] == '5') return detail::read_pgm(path);
  throw DataError("unrecognized image format: " + path.string());
}

inline void save_png(const GrayImage& img, const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), img.bit_depth(), PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int bpp = img.bit_depth() / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * bpp);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      const auto v = img.at(r, c);
      if (bpp == 2) {
        row[2 * c] = static_cast<unsigned char>(v >> 8);
        row[2 * c + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[c] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << img.max_value() << '\n';
  for (auto v : img.samples()) {
    if (img.bit_depth() == 16) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

}  // namespace psltd
