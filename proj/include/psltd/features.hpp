#pragma once

// Post-extraction pooling, training-driven dimension pruning and the on-disk
// descriptor format.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psltd/csv.hpp"
#include "psltd/error.hpp"

namespace psltd {

struct FeatureRow {
  std::vector<double> values;
  std::string label;  // printer id, empty when unknown
  std::string page_id;
  int ordinal = 0;
  std::string font_tag;
};

struct FeatureMatrix {
  int dim = 0;
  std::vector<FeatureRow> rows;

  void add(FeatureRow row) {
    if (rows.empty() && dim == 0) dim = static_cast<int>(row.values.size());
    if (static_cast<int>(row.values.size()) != dim)
      throw DataError("feature row dimension mismatch");
    rows.push_back(std::move(row));
  }

  /// Ordinals must strictly increase within each page_id.
  void validate() const {
    std::map<std::string, int> last;
    for (const auto& r : rows) {
      if (static_cast<int>(r.values.size()) != dim) throw DataError("feature row dimension mismatch");
      auto it = last.find(r.page_id);
      if (it != last.end() && r.ordinal <= it->second)
        throw DataError("ordinals not increasing within page " + r.page_id);
      last[r.page_id] = r.ordinal;
    }
  }
};

/// Averages consecutive groups of `np` rows of one page; a short trailing group
/// is averaged on its own. np == 0 pools the whole page into one row.
inline std::vector<FeatureRow> poep_pool(std::span<const FeatureRow> page_rows, int np) {
  if (np < 0) throw ConfigError("pooling: Np must be >= 0");
  std::vector<FeatureRow> pooled;
  if (page_rows.empty()) return pooled;
  const std::size_t group = np == 0 ? page_rows.size() : static_cast<std::size_t>(np);
  const std::size_t dim = page_rows.front().values.size();
  for (std::size_t start = 0; start < page_rows.size(); start += group) {
    const std::size_t end = std::min(start + group, page_rows.size());
    FeatureRow out;
    out.values.assign(dim, 0.0);
    for (std::size_t i = start; i < end; ++i) {
      if (page_rows[i].values.size() != dim) throw DataError("pooling: dimension mismatch");
      for (std::size_t d = 0; d < dim; ++d) out.values[d] += page_rows[i].values[d];
    }
    const double count = static_cast<double>(end - start);
    for (double& v : out.values) v /= count;
    out.label = page_rows[start].label;
    out.page_id = page_rows[start].page_id;
    out.font_tag = page_rows[start].font_tag;
    out.ordinal = static_cast<int>(pooled.size());
    pooled.push_back(std::move(out));
  }
  return pooled;
}

struct PruneMask {
  int source_dim = 0;
  std::vector<int> kept;
  std::vector<double> nonzero_fraction;  // training statistics, per source dim
  std::vector<double> variance;

  nlohmann::json to_json() const { return {{"source_dim", source_dim}, {"kept", kept}}; }

  static PruneMask from_json(const nlohmann::json& j) {
    PruneMask mask;
    mask.source_dim = j.at("source_dim").get<int>();
    mask.kept = j.at("kept").get<std::vector<int>>();
    for (std::size_t i = 0; i < mask.kept.size(); ++i) {
      if (mask.kept[i] < 0 || mask.kept[i] >= mask.source_dim ||
          (i && mask.kept[i] <= mask.kept[i - 1]))
        throw DataError("prune mask: kept indices must be sorted and in range");
    }
    return mask;
  }
};

inline constexpr double kPruneNonzeroFraction = 0.01;
inline constexpr double kPruneVariance = 1e-9;

/// Drops a dimension only when it is nonzero in fewer than 1% of training rows
/// and its population variance is below 1e-9.
inline PruneMask fit_prune_mask(const FeatureMatrix& train) {
  if (train.rows.size() < 2) throw DataError("prune: need at least 2 training rows");
  const std::size_t n = train.rows.size();
  PruneMask mask;
  mask.source_dim = train.dim;
  mask.nonzero_fraction.assign(train.dim, 0.0);
  mask.variance.assign(train.dim, 0.0);
  for (int d = 0; d < train.dim; ++d) {
    double mean = 0.0;
    std::size_t nonzero = 0;
    for (const auto& r : train.rows) {
      mean += r.values[d];
      nonzero += r.values[d] != 0.0;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : train.rows) var += (r.values[d] - mean) * (r.values[d] - mean);
    var /= static_cast<double>(n);
    mask.nonzero_fraction[d] = static_cast<double>(nonzero) / static_cast<double>(n);
    mask.variance[d] = var;
    const bool drop = mask.nonzero_fraction[d] < kPruneNonzeroFraction && var < kPruneVariance;
    if (!drop) mask.kept.push_back(d);
  }
  if (mask.kept.empty()) throw DataError("prune: every dimension removed; features look corrupt");
  return mask;
}

inline std::vector<double> project(std::span<const double> values, const PruneMask& mask) {
  std::vector<double> out;
  out.reserve(mask.kept.size());
  for (int d : mask.kept) out.push_back(values[d]);
  return out;
}

inline FeatureMatrix apply_prune(const FeatureMatrix& matrix, const PruneMask& mask) {
  if (matrix.dim != mask.source_dim) throw DataError("prune: matrix/mask dimension mismatch");
  FeatureMatrix out;
  out.dim = static_cast<int>(mask.kept.size());
  out.rows.reserve(matrix.rows.size());
  for (const auto& r : matrix.rows) {
    FeatureRow p = r;
    p.values = project(r.values, mask);
    out.rows.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary row format: "PSLT", u32 version, u32 dim, u64 count, then count rows
// of dim little-endian float32.

inline constexpr std::uint32_t kDescriptorFormatVersion = 1;

namespace detail {

inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int ch = in.get();
    if (ch == EOF) throw DataError("descriptor file truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void write_rows_binary(const std::filesystem::path& path,
                              const std::vector<std::vector<double>>& rows, int dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("PSLT", 4);
  detail::put_le(out, kDescriptorFormatVersion, 4);
  detail::put_le(out, static_cast<std::uint32_t>(dim), 4);
  detail::put_le(out, rows.size(), 8);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != dim) throw DataError("row dimension mismatch on write");
    for (double v : r) detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::vector<std::vector<double>> read_rows_binary(const std::filesystem::path& path,
                                                         int* dim_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PSLT", 4) != 0) throw DataError("bad magic in " + path.string());
  const auto version = detail::get_le(in, 4);
  if (version != kDescriptorFormatVersion)
    throw DataError("unsupported descriptor format version in " + path.string());
  const int dim = static_cast<int>(detail::get_le(in, 4));
  const auto count = detail::get_le(in, 8);
  std::vector<std::vector<double>> rows(count, std::vector<double>(dim));
  for (auto& r : rows)
    for (double& v : r)
      v = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(in, 4)));
  if (dim_out) *dim_out = dim;
  return rows;
}

/// Writes `<path>` (binary rows), `<path>.csv` (row metadata) and
/// `<path>.json` (run metadata: config hash and pooling).
inline void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& matrix,
                               const nlohmann::json& meta) {
  std::vector<std::vector<double>> rows;
  rows.reserve(matrix.rows.size());
  for (const auto& r : matrix.rows) rows.push_back(r.values);
  write_rows_binary(path, rows, matrix.dim);

  std::ofstream side(path.string() + ".csv");
  if (!side) throw DataError("cannot write sidecar for " + path.string());
  csv::write_row(side, {"row", "page_id", "ordinal", "label", "font_tag"});
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const auto& r = matrix.rows[i];
    csv::write_row(side, {std::to_string(i), r.page_id, std::to_string(r.ordinal), r.label,
                          r.font_tag});
  }
  nlohmann::json m = meta;
  m["dim"] = matrix.dim;
  m["count"] = matrix.rows.size();
  std::ofstream mj(path.string() + ".json");
  mj << m.dump(2) << '\n';
}

struct LoadedFeatures {
  FeatureMatrix matrix;
  nlohmann::json meta;
};

inline LoadedFeatures read_feature_file(const std::filesystem::path& path) {
  LoadedFeatures out;
  int dim = 0;
  auto rows = read_rows_binary(path, &dim);
  out.matrix.dim = dim;

  std::ifstream side(path.string() + ".csv");
  if (!side) throw DataError("missing sidecar " + path.string() + ".csv");
  std::string line;
  std::getline(side, line);
  std::size_t i = 0;
  while (std::getline(side, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() < 5 || i >= rows.size()) throw DataError("sidecar does not match rows");
    FeatureRow r;
    r.values = std::move(rows[i++]);
    r.page_id = f[1];
    r.ordinal = std::stoi(f[2]);
    r.label = f[3];
    r.font_tag = f[4];
    out.matrix.rows.push_back(std::move(r));
  }
  if (i != rows.size()) throw DataError("sidecar row count mismatch");

  std::ifstream mj(path.string() + ".json");
  if (!mj) throw DataError("missing metadata " + path.string() + ".json");
  out.meta = nlohmann::json::parse(mj);
  return out;
}

}  // namespace psltd
