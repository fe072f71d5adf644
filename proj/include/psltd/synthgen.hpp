#pragma once

// Synthetic "printed" pages: procedural glyphs in four style families, and
// per-printer degradation (dot gain, ragged edges, banding, toner noise).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "psltd/image.hpp"
#include "psltd/imaging.hpp"

namespace psltd {

enum class GlyphStyle { blocky, rounded, slanted, irregular };

inline std::string_view style_name(GlyphStyle s) {
  switch (s) {
    case GlyphStyle::blocky: return "blocky";
    case GlyphStyle::rounded: return "rounded";
    case GlyphStyle::slanted: return "slanted";
    case GlyphStyle::irregular: return "irregular";
  }
  return "blocky";
}

inline GlyphStyle parse_style(std::string_view name) {
  for (auto s : {GlyphStyle::blocky, GlyphStyle::rounded, GlyphStyle::slanted, GlyphStyle::irregular})
    if (style_name(s) == name) return s;
  throw ConfigError("unknown glyph style '" + std::string(name) + "'");
}

/// Intensities are in 8-bit units and rescaled for 16-bit pages.
struct PrinterProfile {
  std::string id;
  std::uint64_t seed = 0;
  double toner_sigma = 0.0;
  double dot_gain = 0.0;
  double banding_amplitude = 0.0;
  double banding_period = 0.0;
  double edge_raggedness = 0.0;
  double base_darkness = 0.0;

  void validate() const {
    for (double v : {toner_sigma, dot_gain, banding_amplitude, banding_period, edge_raggedness,
                     base_darkness})
      if (!(v >= 0.0)) throw ConfigError("printer profile '" + id + "': parameters must be >= 0");
  }
};

/// Weighted L1 distance between profiles' physical parameters. Profiles at
/// distance >= kProfileSeparation are treated as well separated.
inline double profile_distance(const PrinterProfile& a, const PrinterProfile& b) {
  return std::abs(a.toner_sigma - b.toner_sigma) / 2.0 + std::abs(a.dot_gain - b.dot_gain) / 0.25 +
         std::abs(a.banding_amplitude - b.banding_amplitude) / 10.0 +
         std::abs(a.edge_raggedness - b.edge_raggedness) / 0.2 +
         std::abs(a.base_darkness - b.base_darkness) / 10.0;
}

inline constexpr double kProfileSeparation = 3.0;

/// Four mutually well-separated printers.
inline std::vector<PrinterProfile> preset_profiles() {
  return {
      {"printer-a", 1001, 8.0, 0.0, 0.0, 0.0, 0.0, 10.0},
      {"printer-b", 1002, 14.0, 0.6, 0.0, 0.0, 0.3, 40.0},
      {"printer-c", 1003, 20.0, 1.2, 25.0, 24.0, 0.0, 25.0},
      {"printer-d", 1004, 28.0, 0.3, 0.0, 0.0, 0.8, 60.0},
  };
}

struct RenderSpec {
  int glyph_count = 1;
  GlyphStyle style = GlyphStyle::blocky;
  std::uint64_t layout_seed = 0;
  int page_width = 0;  // 0: sized to fit
  int page_height = 0;
  int columns = 12;    // used when sizing automatically
  int speckles = 0;    // tiny noise blobs placed between glyphs
};

struct RenderedPage {
  GrayImage image;   // clean page: ink 0, paper at max value
  BinaryMask ink;
  std::vector<BoundingBox> glyphs;
  std::vector<int> glyph_ink;  // ink pixels per glyph
  std::vector<BoundingBox> speckles;
};

inline constexpr int kCellWidth = 68;
inline constexpr int kCellHeight = 76;
inline constexpr int kGlyphCanvasWidth = 48;
inline constexpr int kGlyphCanvasHeight = 56;
inline constexpr int kPageMargin = 24;

namespace detail {

struct Pt {
  double x;
  double y;
};

struct Stroke {
  Pt a;
  Pt b;
  double half_width;
  bool square;  // Chebyshev footprint (axis-aligned strokes)
};

inline double segment_distance(Pt p, const Stroke& s) {
  const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = s.a.x + t * dx - p.x, qy = s.a.y + t * dy - p.y;
  if (s.square) return std::max(std::abs(qx), std::abs(qy));
  return std::sqrt(qx * qx + qy * qy);
}

inline Pt point_on(const std::vector<Stroke>& strokes, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, strokes.size() - 1);
  const Stroke& s = strokes[pick(rng)];
  std::uniform_int_distribution<int> where(0, 2);
  const double t = where(rng) / 2.0;
  return {s.a.x + t * (s.b.x - s.a.x), s.a.y + t * (s.b.y - s.a.y)};
}

inline std::vector<Stroke> glyph_strokes(GlyphStyle style, std::mt19937_64& rng) {
  std::vector<Stroke> strokes;
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](std::initializer_list<double> v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return *(v.begin() + static_cast<std::ptrdiff_t>(d(rng)));
  };
  switch (style) {
    case GlyphStyle::blocky:
    case GlyphStyle::slanted: {
      const bool slant = style == GlyphStyle::slanted;
      const double hw = 3.0;
      const double x_hi = slant ? 26.0 : 40.0;
      const std::initializer_list<double> xs = slant ? std::initializer_list<double>{4.0, 15.0, 26.0}
                                                     : std::initializer_list<double>{4.0, 22.0, 40.0};
      const double stem = pick(xs);
      strokes.push_back({{stem, 4.0}, {stem, 51.0}, hw, !slant});
      const int extra = std::uniform_int_distribution<int>(2, 3)(rng);
      for (int e = 0; e < extra; ++e) {
        Pt start = point_on(strokes, rng);
        if (e % 2 == 0) {
          const double x_end = start.x < x_hi / 2 ? x_hi : 4.0;
          strokes.push_back({start, {x_end, start.y}, hw, !slant});
        } else {
          const double y_end = start.y < 27.0 ? pick({27.0, 51.0}) : pick({4.0, 27.0});
          strokes.push_back({start, {start.x, y_end}, hw, !slant});
        }
      }
      if (slant) {
        for (auto& s : strokes) {
          s.a.x += 0.3 * (51.0 - s.a.y);
          s.b.x += 0.3 * (51.0 - s.b.y);
        }
      }
      break;
    }
    case GlyphStyle::rounded: {
      const double hw = uni(2.5, 3.5);
      const double cx = 22.0, cy = 27.0;
      const double rx = uni(11.0, 15.0), ry = uni(15.0, 20.0);
      const double start = uni(0.0, 2.0 * std::numbers::pi);
      const double sweep = uni(1.1 * std::numbers::pi, 1.8 * std::numbers::pi);
      const int pieces = 24;
      Pt prev{cx + rx * std::cos(start), cy + ry * std::sin(start)};
      for (int i = 1; i <= pieces; ++i) {
        const double a = start + sweep * i / pieces;
        Pt next{cx + rx * std::cos(a), cy + ry * std::sin(a)};
        strokes.push_back({prev, next, hw, false});
        prev = next;
      }
      if (std::uniform_int_distribution<int>(0, 1)(rng)) {
        const Pt from = strokes.back().b;
        strokes.push_back({from, {from.x < cx ? from.x + 6.0 : from.x - 6.0, cy}, hw, false});
      }
      break;
    }
    case GlyphStyle::irregular: {
      Pt prev{uni(5.0, 38.0), uni(5.0, 50.0)};
      const int pieces = std::uniform_int_distribution<int>(4, 6)(rng);
      for (int i = 0; i < pieces; ++i) {
        Pt next{uni(5.0, 38.0), uni(5.0, 50.0)};
        strokes.push_back({prev, next, uni(2.0, 3.5), false});
        prev = next;
      }
      break;
    }
  }
  return strokes;
}

/// Rasterizes one glyph onto a canvas-sized mask.
inline BinaryMask rasterize_glyph(GlyphStyle style, std::mt19937_64& rng) {
  const auto strokes = glyph_strokes(style, rng);
  BinaryMask canvas(kGlyphCanvasWidth, kGlyphCanvasHeight);
  for (int r = 0; r < canvas.height; ++r)
    for (int c = 0; c < canvas.width; ++c)
      for (const auto& s : strokes)
        if (segment_distance({static_cast<double>(c), static_cast<double>(r)}, s) <= s.half_width) {
          canvas.set(r, c, true);
          break;
        }
  return canvas;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Places `glyph_count` non-touching glyphs on a white page, one per grid cell.
inline RenderedPage render_page(const RenderSpec& spec) {
  if (spec.glyph_count < 1) throw ConfigError("render_page: glyph_count must be >= 1");
  int width = spec.page_width, height = spec.page_height;
  int columns = std::max(1, std::min(spec.columns, spec.glyph_count));
  if (width > 0) columns = (width - 2 * kPageMargin) / kCellWidth;
  if (columns < 1) throw ConfigError("render_page: page too narrow for one glyph");
  const int rows_needed = (spec.glyph_count + columns - 1) / columns;
  if (width <= 0) width = 2 * kPageMargin + columns * kCellWidth;
  if (height <= 0) height = 2 * kPageMargin + rows_needed * kCellHeight;
  const int rows_avail = (height - 2 * kPageMargin) / kCellHeight;
  if (rows_avail < rows_needed || (height - 2 * kPageMargin) < 0)
    throw ConfigError("render_page: page too small for " + std::to_string(spec.glyph_count) +
                      " glyphs");

  std::mt19937_64 rng(detail::mix_seed(spec.layout_seed, static_cast<std::uint64_t>(spec.style)));
  RenderedPage page;
  page.ink = BinaryMask(width, height);
  std::uniform_int_distribution<int> jitter_x(4, kCellWidth - kGlyphCanvasWidth - 4);
  std::uniform_int_distribution<int> jitter_y(4, kCellHeight - kGlyphCanvasHeight - 4);
  for (int g = 0; g < spec.glyph_count; ++g) {
    const int ox = kPageMargin + (g % columns) * kCellWidth + jitter_x(rng);
    const int oy = kPageMargin + (g / columns) * kCellHeight + jitter_y(rng);
    const BinaryMask glyph = detail::rasterize_glyph(spec.style, rng);
    int rmin = height, rmax = -1, cmin = width, cmax = -1, count = 0;
    for (int r = 0; r < glyph.height; ++r)
      for (int c = 0; c < glyph.width; ++c)
        if (glyph.at(r, c)) {
          page.ink.set(oy + r, ox + c, true);
          rmin = std::min(rmin, oy + r);
          rmax = std::max(rmax, oy + r);
          cmin = std::min(cmin, ox + c);
          cmax = std::max(cmax, ox + c);
          ++count;
        }
    page.glyphs.push_back({cmin, rmin, cmax - cmin + 1, rmax - rmin + 1});
    page.glyph_ink.push_back(count);
  }

  // Speckles: 1-2 px blobs at least 4 px from any ink.
  auto clear_around = [&](int r0, int c0, int size) {
    for (int r = r0 - 4; r < r0 + size + 4; ++r)
      for (int c = c0 - 4; c < c0 + size + 4; ++c)
        if (r < 0 || c < 0 || r >= height || c >= width || page.ink.at(r, c)) return false;
    return true;
  };
  std::uniform_int_distribution<int> sr(0, height - 1), sc(0, width - 1), ss(1, 2);
  for (int s = 0, attempts = 0; s < spec.speckles; ++attempts) {
    if (attempts > 100000) throw ConfigError("render_page: no room for speckles");
    const int r0 = sr(rng), c0 = sc(rng), size = ss(rng);
    if (!clear_around(r0, c0, size)) continue;
    for (int r = r0; r < r0 + size; ++r)
      for (int c = c0; c < c0 + size; ++c) page.ink.set(r, c, true);
    page.speckles.push_back({c0, r0, size, size});
    ++s;
  }

  std::vector<std::uint16_t> samples(static_cast<std::size_t>(width) * height, 255);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (page.ink.bits[i]) samples[i] = 0;
  page.image = GrayImage(width, height, 8, std::move(samples));
  return page;
}

/// Degrades a clean page: dot gain and edge raggedness reshape ink coverage,
/// banding modulates ink darkness by row, then additive toner noise and a
/// clamp to the bit depth. Pixels outside the ink footprint keep their input
/// value before noise.
inline GrayImage apply_profile(const GrayImage& clean, const PrinterProfile& profile,
                               std::uint64_t page_seed) {
  profile.validate();
  const int w = clean.width(), h = clean.height();
  const double maxval = clean.max_value();
  const double unit = maxval / 255.0;
  std::mt19937_64 rng(detail::mix_seed(profile.seed, page_seed));
  std::normal_distribution<double> ragged(0.0, std::max(profile.edge_raggedness, 1e-300));
  std::normal_distribution<double> toner(0.0, std::max(profile.toner_sigma * unit, 1e-300));

  auto is_ink = [&](int r, int c) { return clean.at(r, c) <= maxval / 2.0; };
  const int reach = static_cast<int>(std::ceil(profile.dot_gain + 4.0 * profile.edge_raggedness)) + 2;

  std::vector<std::uint16_t> out(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    double ink_level = profile.base_darkness * unit;
    if (profile.banding_amplitude > 0.0 && profile.banding_period > 0.0)
      ink_level += profile.banding_amplitude * unit *
                   std::sin(2.0 * std::numbers::pi * r / profile.banding_period);
    for (int c = 0; c < w; ++c) {
      const bool ink = is_ink(r, c);
      double dist = 0.0;
      bool edge = false;
      if (ink) {
        for (int dr = -1; dr <= 1 && !edge; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = r + dr, nc = c + dc;
            if (nr >= 0 && nc >= 0 && nr < h && nc < w && !is_ink(nr, nc)) {
              edge = true;
              break;
            }
          }
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (int nr = std::max(0, r - reach); nr <= std::min(h - 1, r + reach); ++nr)
          for (int nc = std::max(0, c - reach); nc <= std::min(w - 1, c + reach); ++nc)
            if (is_ink(nr, nc)) best = std::min(best, std::hypot(nr - r, nc - c));
        dist = best;
        edge = dist <= profile.dot_gain + 1.5;
      }
      double jitter = 0.0;
      if (edge && profile.edge_raggedness > 0.0) jitter = ragged(rng);
      const double coverage = std::clamp(1.0 + profile.dot_gain - dist + jitter, 0.0, 1.0);

      double v = clean.at(r, c);
      if (ink || coverage > 0.0) v = maxval - coverage * (maxval - ink_level);
      if (profile.toner_sigma > 0.0 && v < maxval) v += toner(rng);
      out[static_cast<std::size_t>(r) * w + c] =
          static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, maxval));
    }
  }
  return GrayImage(w, h, clean.bit_depth(), std::move(out));
}

}  // namespace psltd
