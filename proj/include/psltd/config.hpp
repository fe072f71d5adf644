#pragma once

// Run configuration: parsing from JSON, validation, and the hash that ties
// feature files and models to the settings that produced them.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "psltd/classifier.hpp"
#include "psltd/descriptor.hpp"
#include "psltd/gabor.hpp"
#include "psltd/imaging.hpp"

namespace psltd {

inline constexpr int kAutoNp = -1;

struct RunConfig {
  int bit_depth = 8;
  DescriptorParams descriptor = DescriptorParams::for_bit_depth(8);
  GaborConfig gabor;
  FilterPolicy filter;
  int np = kAutoNp;  // -1: whole page when >= 20 training pages per printer, else 20
  GridSearchSpec grid;
  SmoOptions smo;
  Scaling scaling = Scaling::none;
  bool luma = false;
  double max_skip_fraction = 0.10;
  std::uint64_t seed = 1;
  int jobs = 1;

  void validate() const {
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("bit_depth must be 8 or 16");
    descriptor.validate();
    gabor.validate();
    if (gabor.scales != kScales) throw ConfigError("gabor: descriptor requires exactly 3 scales");
    filter.validate();
    if (np < kAutoNp) throw ConfigError("pooling.np must be >= 0, or -1 for automatic");
    grid.validate();
    if (!(smo.eps > 0.0) || smo.max_iterations < 1) throw ConfigError("svm: bad solver options");
    if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0))
      throw ConfigError("max_skip_fraction must lie in [0, 1]");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
  }

  /// Settings that change extracted features; seeds, grid and jobs excluded.
  nlohmann::json feature_settings() const {
    nlohmann::json j;
    j["bit_depth"] = bit_depth;
    j["descriptor"] = {{"T0", descriptor.t0},
                       {"T1", descriptor.t1},
                       {"G0", descriptor.g0},
                       {"eq18_literal", descriptor.eq18_literal},
                       {"mag_index_mode", descriptor.mag_mode == MagIndexMode::as_printed
                                              ? "as_printed"
                                              : "symmetric"}};
    j["gabor"] = {{"lambda0", gabor.lambda0},
                  {"ratio", gabor.ratio},
                  {"kernel_size", gabor.kernel_size},
                  {"sigma_factor", gabor.sigma_factor}};
    j["filter"] = {{"area_lo_factor", filter.area_lo_factor},
                   {"area_hi_factor", filter.area_hi_factor}};
    if (filter.size_bounds) {
      const auto& sb = *filter.size_bounds;
      j["filter"]["size_bounds"] = {
          {"min_w", sb.min_w}, {"min_h", sb.min_h}, {"max_w", sb.max_w}, {"max_h", sb.max_h}};
    }
    j["luma"] = luma;
    return j;
  }

  /// Hash of the feature settings plus the resolved pooling size.
  std::string hash(int resolved_np) const {
    nlohmann::json j = feature_settings();
    j["np"] = resolved_np;
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : text) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

/// Whole page for >= 20 training pages per printer, otherwise 20 letters.
inline int resolve_np(int configured, int train_pages_per_printer) {
  if (configured != kAutoNp) return configured;
  return train_pages_per_printer >= 20 ? 0 : 20;
}

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    detail::read_opt(j, "bit_depth", cfg.bit_depth);
    cfg.descriptor = DescriptorParams::for_bit_depth(cfg.bit_depth);
    if (j.contains("descriptor")) {
      const auto& d = j.at("descriptor");
      detail::read_opt(d, "T0", cfg.descriptor.t0);
      detail::read_opt(d, "T1", cfg.descriptor.t1);
      detail::read_opt(d, "G0", cfg.descriptor.g0);
      detail::read_opt(d, "eq18_literal", cfg.descriptor.eq18_literal);
      if (d.contains("mag_index_mode")) {
        const auto mode = d.at("mag_index_mode").get<std::string>();
        if (mode == "as_printed") cfg.descriptor.mag_mode = MagIndexMode::as_printed;
        else if (mode == "symmetric") cfg.descriptor.mag_mode = MagIndexMode::symmetric;
        else throw ConfigError("descriptor.mag_index_mode must be as_printed or symmetric");
      }
    }
    if (j.contains("gabor")) {
      const auto& g = j.at("gabor");
      detail::read_opt(g, "lambda0", cfg.gabor.lambda0);
      detail::read_opt(g, "ratio", cfg.gabor.ratio);
      detail::read_opt(g, "kernel_size", cfg.gabor.kernel_size);
      detail::read_opt(g, "sigma_factor", cfg.gabor.sigma_factor);
    }
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      detail::read_opt(f, "area_lo_factor", cfg.filter.area_lo_factor);
      detail::read_opt(f, "area_hi_factor", cfg.filter.area_hi_factor);
      if (f.contains("size_bounds") && !f.at("size_bounds").is_null()) {
        SizeBounds sb;
        const auto& b = f.at("size_bounds");
        detail::read_opt(b, "min_w", sb.min_w);
        detail::read_opt(b, "min_h", sb.min_h);
        detail::read_opt(b, "max_w", sb.max_w);
        detail::read_opt(b, "max_h", sb.max_h);
        cfg.filter.size_bounds = sb;
      }
    }
    if (j.contains("pooling")) detail::read_opt(j.at("pooling"), "np", cfg.np);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (g.contains("log2c")) {
        const auto r = g.at("log2c").get<std::vector<int>>();
        if (r.size() != 3) throw ConfigError("grid.log2c must be [lo, hi, step]");
        cfg.grid.log2_c = GridSearchSpec::range(r[0], r[1], r[2]);
      }
      if (g.contains("log2g")) {
        const auto r = g.at("log2g").get<std::vector<int>>();
        if (r.size() != 3) throw ConfigError("grid.log2g must be [lo, hi, step]");
        cfg.grid.log2_gamma = GridSearchSpec::range(r[0], r[1], r[2]);
      }
      detail::read_opt(g, "folds", cfg.grid.folds);
    }
    if (j.contains("svm")) {
      detail::read_opt(j.at("svm"), "eps", cfg.smo.eps);
      detail::read_opt(j.at("svm"), "max_iter", cfg.smo.max_iterations);
      if (j.at("svm").contains("scaling"))
        cfg.scaling = parse_scaling(j.at("svm").at("scaling").get<std::string>());
    }
    detail::read_opt(j, "luma", cfg.luma);
    detail::read_opt(j, "max_skip_fraction", cfg.max_skip_fraction);
    detail::read_opt(j, "seed", cfg.seed);
    detail::read_opt(j, "jobs", cfg.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace psltd
