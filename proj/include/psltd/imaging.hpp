#pragma once

// Page binarization, connected-component extraction and spurious-component
// filtering.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "psltd/image.hpp"

namespace psltd {

struct BoundingBox {
  int x0 = 0;  // column of top-left corner
  int y0 = 0;  // row of top-left corner
  int w = 0;
  int h = 0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Component {
  BoundingBox bbox;
  GrayImage crop;  // taken from the original grayscale page
  int area = 0;    // foreground pixel count
  std::string page_id;
  int ordinal = 0;
};

struct SizeBounds {
  int min_w = 15;
  int min_h = 30;
  int max_w = 90;
  int max_h = 100;
};

struct FilterPolicy {
  double area_lo_factor = 0.5;
  double area_hi_factor = 4.0;
  std::optional<SizeBounds> size_bounds;

  void validate() const {
    if (!(area_lo_factor < area_hi_factor))
      throw ConfigError("filter: area_lo_factor must be below area_hi_factor");
    if (area_lo_factor < 0) throw ConfigError("filter: area factors must be non-negative");
  }
};

/// Otsu threshold over the full histogram; returns the largest intensity of
/// the dark class, or nullopt when the image has a single level.
inline std::optional<std::uint32_t> otsu_threshold(const GrayImage& img) {
  std::vector<double> hist(static_cast<std::size_t>(img.max_value()) + 1, 0.0);
  for (auto s : img.samples()) hist[s] += 1.0;
  const double total = static_cast<double>(img.samples().size());

  double sum_all = 0.0;
  int levels = 0;
  for (std::size_t v = 0; v < hist.size(); ++v) {
    sum_all += static_cast<double>(v) * hist[v];
    if (hist[v] > 0) ++levels;
  }
  if (levels < 2) return std::nullopt;

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  std::uint32_t best_t = 0;
  for (std::size_t t = 0; t + 1 < hist.size(); ++t) {
    w0 += hist[t];
    sum0 += static_cast<double>(t) * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = static_cast<std::uint32_t>(t);
    }
  }
  return best_t;
}

/// Foreground (ink) is every pixel at or below the Otsu threshold.
inline BinaryMask binarize(const GrayImage& img) {
  if (img.empty()) throw DataError("binarize: empty image");
  BinaryMask mask(img.width(), img.height());
  const auto t = otsu_threshold(img);
  if (!t) {
    log::warn("binarize: image has a single intensity level, no foreground");
    return mask;
  }
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) mask.set(r, c, img.at(r, c) <= *t);
  return mask;
}

struct LabeledRegion {
  BoundingBox bbox;
  int area = 0;
};

/// 8-connected labeling. Regions come back sorted by bbox top-left
/// (row first, then column), ties kept in raster discovery order.
inline std::vector<LabeledRegion> label_regions(const BinaryMask& mask) {
  std::vector<LabeledRegion> regions;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * mask.width + c;
      if (!mask.bits[idx] || seen[idx]) continue;
      int rmin = r, rmax = r, cmin = c, cmax = c, area = 0;
      seen[idx] = 1;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [pr, pc] = stack.back();
        stack.pop_back();
        ++area;
        rmin = std::min(rmin, pr);
        rmax = std::max(rmax, pr);
        cmin = std::min(cmin, pc);
        cmax = std::max(cmax, pc);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = pr + dr, nc = pc + dc;
            if (nr < 0 || nc < 0 || nr >= mask.height || nc >= mask.width) continue;
            const std::size_t nidx = static_cast<std::size_t>(nr) * mask.width + nc;
            if (mask.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back({nr, nc});
            }
          }
        }
      }
      regions.push_back({{cmin, rmin, cmax - cmin + 1, rmax - rmin + 1}, area});
    }
  }
  std::stable_sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
    return a.bbox.y0 != b.bbox.y0 ? a.bbox.y0 < b.bbox.y0 : a.bbox.x0 < b.bbox.x0;
  });
  return regions;
}

inline std::vector<Component> extract_components(const GrayImage& img,
                                                 const std::string& page_id = {}) {
  const auto regions = label_regions(binarize(img));
  std::vector<Component> out;
  out.reserve(regions.size());
  for (const auto& reg : regions) {
    Component comp;
    comp.bbox = reg.bbox;
    comp.crop = img.crop(reg.bbox.x0, reg.bbox.y0, reg.bbox.w, reg.bbox.h);
    comp.area = reg.area;
    comp.page_id = page_id;
    comp.ordinal = static_cast<int>(out.size());
    out.push_back(std::move(comp));
  }
  return out;
}

inline double median_area(const std::vector<Component>& comps) {
  std::vector<int> areas;
  areas.reserve(comps.size());
  for (const auto& c : comps) areas.push_back(c.area);
  std::sort(areas.begin(), areas.end());
  const std::size_t n = areas.size();
  if (n % 2 == 1) return areas[n / 2];
  return 0.5 * (static_cast<double>(areas[n / 2 - 1]) + areas[n / 2]);
}

/// Keeps components whose area lies within [lo, hi] times the median area of
/// all inputs, optionally bounded in size. Order is preserved and ordinals are
/// renumbered densely.
inline std::vector<Component> filter_components(std::vector<Component> comps,
                                                const FilterPolicy& policy) {
  if (comps.empty()) return comps;
  const double median = median_area(comps);
  const double lo = policy.area_lo_factor * median;
  const double hi = policy.area_hi_factor * median;
  std::vector<Component> kept;
  kept.reserve(comps.size());
  for (auto& c : comps) {
    if (c.area < lo || c.area > hi) continue;
    if (policy.size_bounds) {
      const auto& sb = *policy.size_bounds;
      if (c.bbox.w < sb.min_w || c.bbox.w > sb.max_w || c.bbox.h < sb.min_h ||
          c.bbox.h > sb.max_h)
        continue;
    }
    c.ordinal = static_cast<int>(kept.size());
    kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace psltd
