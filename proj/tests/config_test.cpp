#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "psltd/config.hpp"

using namespace psltd;
using nlohmann::json;

TEST(Config, Defaults) {
  const auto cfg = config_from_json(json::object());
  EXPECT_EQ(cfg.bit_depth, 8);
  EXPECT_EQ(cfg.descriptor.t0, 20);
  EXPECT_EQ(cfg.descriptor.t1, 80);
  EXPECT_EQ(cfg.descriptor.g0, 90);
  EXPECT_EQ(cfg.np, kAutoNp);
  EXPECT_EQ(cfg.grid.log2_c.front(), -5);
  EXPECT_EQ(cfg.grid.log2_c.back(), 15);
  EXPECT_EQ(cfg.grid.log2_gamma.front(), -15);
  EXPECT_EQ(cfg.grid.log2_gamma.back(), 3);
  EXPECT_EQ(cfg.grid.folds, 5);
  EXPECT_EQ(cfg.scaling, Scaling::none);
  EXPECT_DOUBLE_EQ(cfg.smo.eps, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.max_skip_fraction, 0.10);
}

TEST(Config, SixteenBitDefaults) {
  const auto cfg = config_from_json({{"bit_depth", 16}});
  EXPECT_EQ(cfg.descriptor.t0, 13000);
  EXPECT_EQ(cfg.descriptor.t1, 50000);
}

TEST(Config, EveryKeyParsed) {
  const json j = {
      {"bit_depth", 8},
      {"descriptor", {{"T0", 4}, {"T1", 20}, {"G0", 45}, {"eq18_literal", true}, {"mag_index_mode", "symmetric"}}},
      {"gabor", {{"lambda0", 3.0}, {"ratio", 1.5}, {"kernel_size", 12}, {"sigma_factor", 0.5}}},
      {"filter", {{"area_lo_factor", 0.4}, {"area_hi_factor", 3.0}, {"size_bounds", {{"min_w", 10}, {"max_h", 80}}}}},
      {"pooling", {{"np", 10}}},
      {"grid", {{"log2c", {-1, 3, 2}}, {"log2g", {-5, -1, 2}}, {"folds", 3}}},
      {"svm", {{"eps", 1e-4}, {"max_iter", 5000}, {"scaling", "minmax"}}},
      {"luma", true},
      {"max_skip_fraction", 0.2},
      {"seed", 99},
      {"jobs", 3}};
  const auto cfg = config_from_json(j);
  EXPECT_EQ(cfg.descriptor.t0, 4);
  EXPECT_EQ(cfg.descriptor.t1, 20);
  EXPECT_EQ(cfg.descriptor.g0, 45);
  EXPECT_TRUE(cfg.descriptor.eq18_literal);
  EXPECT_EQ(cfg.descriptor.mag_mode, MagIndexMode::symmetric);
  EXPECT_EQ(cfg.gabor.lambda0, 3.0);
  EXPECT_EQ(cfg.gabor.ratio, 1.5);
  EXPECT_EQ(cfg.gabor.kernel_size, 12);
  EXPECT_EQ(cfg.gabor.sigma_factor, 0.5);
  EXPECT_EQ(cfg.filter.area_lo_factor, 0.4);
  EXPECT_EQ(cfg.filter.area_hi_factor, 3.0);
  ASSERT_TRUE(cfg.filter.size_bounds.has_value());
  EXPECT_EQ(cfg.filter.size_bounds->min_w, 10);
  EXPECT_EQ(cfg.filter.size_bounds->min_h, 30);
  EXPECT_EQ(cfg.filter.size_bounds->max_h, 80);
  EXPECT_EQ(cfg.np, 10);
  EXPECT_EQ(cfg.grid.log2_c, (std::vector<int>{-1, 1, 3}));
  EXPECT_EQ(cfg.grid.log2_gamma, (std::vector<int>{-5, -3, -1}));
  EXPECT_EQ(cfg.grid.folds, 3);
  EXPECT_EQ(cfg.smo.eps, 1e-4);
  EXPECT_EQ(cfg.smo.max_iterations, 5000);
  EXPECT_EQ(cfg.scaling, Scaling::minmax);
  EXPECT_TRUE(cfg.luma);
  EXPECT_EQ(cfg.max_skip_fraction, 0.2);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.jobs, 3);
}

TEST(Config, ValidationErrors) {
  const std::vector<json> bad{
      {{"bit_depth", 12}},
      {{"descriptor", {{"T0", 90}, {"T1", 80}}}},
      {{"descriptor", {{"mag_index_mode", "diagonal"}}}},
      {{"gabor", {{"scales", 2}, {"lambda0", -1.0}}}},
      {{"filter", {{"area_lo_factor", 5.0}}}},
      {{"pooling", {{"np", -2}}}},
      {{"grid", {{"log2c", {1, 5}}}}},
      {{"grid", {{"log2c", {1, 7, 3}}}}},
      {{"grid", {{"folds", 1}}}},
      {{"svm", {{"eps", 0.0}}}},
      {{"svm", {{"scaling", "zscore"}}}},
      {{"max_skip_fraction", 1.5}},
      {{"jobs", 0}},
      {{"bit_depth", "eight"}},
  };
  for (const auto& j : bad) EXPECT_THROW(config_from_json(j), ConfigError) << j.dump();
}

TEST(Config, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "psltd_config";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "ok.json") << "{\n  // comments allowed\n  \"pooling\": {\"np\": 0}\n}\n";
  EXPECT_EQ(load_config(dir / "ok.json").np, 0);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(ConfigHash, StableAndSensitive) {
  const auto base = config_from_json(json::object());
  const auto h = base.hash(20);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, config_from_json(json::object()).hash(20));
  EXPECT_NE(h, base.hash(0));

  // Feature-affecting settings change the hash.
  for (const json& j : {json{{"descriptor", {{"T0", 4}}}}, json{{"descriptor", {{"G0", 45}}}},
                        json{{"gabor", {{"lambda0", 5.0}}}}, json{{"filter", {{"area_hi_factor", 3.0}}}},
                        json{{"luma", true}}, json{{"bit_depth", 16}}})
    EXPECT_NE(config_from_json(j).hash(20), h) << j.dump();

  // Training-only settings do not.
  for (const json& j : {json{{"seed", 5}}, json{{"jobs", 2}}, json{{"grid", {{"folds", 3}}}},
                        json{{"svm", {{"scaling", "minmax"}}}}})
    EXPECT_EQ(config_from_json(j).hash(20), h) << j.dump();
}

TEST(ResolveNp, AutomaticRule) {
  EXPECT_EQ(resolve_np(kAutoNp, 20), 0);
  EXPECT_EQ(resolve_np(kAutoNp, 35), 0);
  EXPECT_EQ(resolve_np(kAutoNp, 19), 20);
  EXPECT_EQ(resolve_np(kAutoNp, 5), 20);
  EXPECT_EQ(resolve_np(7, 5), 7);
  EXPECT_EQ(resolve_np(0, 5), 0);
}
