#pragma once

// Page-level orchestration shared by the CLI and the acceptance suite:
// manifests, descriptor extraction with optional caching, pooling, training,
// prediction, evaluation splits and linear-structure diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "psltd/classifier.hpp"
#include "psltd/config.hpp"
#include "psltd/csv.hpp"
#include "psltd/descriptor.hpp"
#include "psltd/features.hpp"
#include "psltd/image_io.hpp"
#include "psltd/imaging.hpp"
#include "psltd/parallel.hpp"

namespace psltd {

struct ManifestEntry {
  std::filesystem::path path;
  std::string printer_id;  // empty when unlabeled
  std::string page_id;
  std::string font_tag;
};

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("no pages in manifest " + manifest.string());
  const auto header = csv::split_line(line);
  const std::vector<std::string> expected = {"path", "printer_id", "page_id", "font_tag"};
  if (header != expected)
    throw DataError("manifest header must be path,printer_id,page_id,font_tag");
  std::vector<ManifestEntry> entries;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 4) throw DataError("manifest row needs 4 fields: " + line);
    ManifestEntry e;
    e.path = f[0];
    if (e.path.is_relative()) e.path = manifest.parent_path() / e.path;
    e.printer_id = f[1];
    e.page_id = f[2];
    e.font_tag = f[3];
    if (e.page_id.empty()) throw DataError("manifest row without page_id: " + line);
    if (!ids.insert(e.page_id).second) throw DataError("duplicate page_id " + e.page_id);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("no pages in manifest " + manifest.string());
  return entries;
}

inline void write_manifest(const std::filesystem::path& manifest,
                           const std::vector<ManifestEntry>& entries) {
  std::ofstream out(manifest);
  if (!out) throw DataError("cannot write manifest " + manifest.string());
  csv::write_row(out, {"path", "printer_id", "page_id", "font_tag"});
  for (const auto& e : entries) {
    auto p = e.path;
    if (p.parent_path() == manifest.parent_path()) p = p.filename();
    csv::write_row(out, {p.string(), e.printer_id, e.page_id, e.font_tag});
  }
}

/// Unpooled per-letter descriptors of one page.
struct PageDescriptors {
  ManifestEntry entry;
  std::vector<FeatureRow> letters;
  bool skipped = false;
  std::string error;
};

/// Components -> spurious filter -> one descriptor per letter of at least 3x3.
inline std::vector<FeatureRow> describe_page(const GrayImage& page, const ManifestEntry& entry,
                                             const GaborBank& bank, const RunConfig& cfg) {
  if (page.bit_depth() != cfg.bit_depth)
    throw DataError("page " + entry.page_id + " is " + std::to_string(page.bit_depth()) +
                    "-bit but the config expects " + std::to_string(cfg.bit_depth) + "-bit");
  const auto comps = filter_components(extract_components(page, entry.page_id), cfg.filter);
  std::vector<FeatureRow> rows;
  rows.reserve(comps.size());
  for (const auto& comp : comps) {
    if (comp.crop.width() < 3 || comp.crop.height() < 3) continue;
    FeatureRow row;
    row.values = std::move(compute_psltd(comp, bank, cfg.descriptor)).release();
    row.label = entry.printer_id;
    row.page_id = entry.page_id;
    row.font_tag = entry.font_tag;
    row.ordinal = static_cast<int>(rows.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string fnv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// Cache entries hold raw float64 descriptors: "PSLC", u32 dim, u64 count.
inline std::optional<std::vector<std::vector<double>>> read_cache(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PSLC", 4) != 0) return std::nullopt;
  try {
    const auto dim = get_le(in, 4);
    const auto count = get_le(in, 8);
    std::vector<std::vector<double>> rows(count, std::vector<double>(dim));
    for (auto& r : rows)
      for (double& v : r) v = std::bit_cast<double>(get_le(in, 8));
    return rows;
  } catch (const DataError&) {
    return std::nullopt;
  }
}

inline void write_cache(const std::filesystem::path& p, const std::vector<FeatureRow>& rows) {
  const auto tmp = std::filesystem::path(p.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    out.write("PSLC", 4);
    put_le(out, kPsltdDim, 4);
    put_le(out, rows.size(), 8);
    for (const auto& r : rows)
      for (double v : r.values) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
}

}  // namespace detail

/// Descriptor cache directory from PSLTD_CACHE_DIR, if set.
inline std::optional<std::filesystem::path> cache_dir_from_env() {
  if (const char* dir = std::getenv("PSLTD_CACHE_DIR"); dir && *dir) return std::filesystem::path(dir);
  return std::nullopt;
}

/// Loads and describes each page in parallel. Unreadable pages are skipped
/// with a logged error; more than `max_skip_fraction` skipped is fatal.
inline std::vector<PageDescriptors> extract_pages(const std::vector<ManifestEntry>& entries,
                                                  const RunConfig& cfg,
                                                  std::optional<std::filesystem::path> cache_dir = std::nullopt) {
  if (entries.empty()) throw DataError("no pages");
  const GaborBank bank = build_bank(cfg.gabor);
  const std::string settings_hash = cfg.hash(kAutoNp);
  if (cache_dir) std::filesystem::create_directories(*cache_dir);

  std::vector<PageDescriptors> pages(entries.size());
  parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    PageDescriptors& pd = pages[i];
    pd.entry = entries[i];
    try {
      std::optional<std::filesystem::path> cache_file;
      if (cache_dir) {
        cache_file = *cache_dir / (detail::fnv_file(pd.entry.path) + "_" + settings_hash + ".bin");
        if (auto cached = detail::read_cache(*cache_file)) {
          for (auto& values : *cached) {
            FeatureRow row;
            row.values = std::move(values);
            row.label = pd.entry.printer_id;
            row.page_id = pd.entry.page_id;
            row.font_tag = pd.entry.font_tag;
            row.ordinal = static_cast<int>(pd.letters.size());
            pd.letters.push_back(std::move(row));
          }
          return;
        }
      }
      const GrayImage page = load_image(pd.entry.path, cfg.luma);
      pd.letters = describe_page(page, pd.entry, bank, cfg);
      if (cache_file) detail::write_cache(*cache_file, pd.letters);
    } catch (const std::exception& e) {
      pd.skipped = true;
      pd.error = e.what();
      pd.letters.clear();
    }
  });

  std::size_t skipped = 0;
  for (const auto& pd : pages) {
    if (pd.skipped) {
      ++skipped;
      log::warn("skipping page " + pd.entry.page_id + ": " + pd.error);
    } else if (pd.letters.empty()) {
      log::warn("page " + pd.entry.page_id + " yielded no letters");
    }
  }
  if (static_cast<double>(skipped) > cfg.max_skip_fraction * static_cast<double>(pages.size()))
    throw DataError(std::to_string(skipped) + " of " + std::to_string(pages.size()) +
                    " pages could not be processed");
  return pages;
}

/// Fewest pages any printer contributes.
inline int min_pages_per_printer(const std::vector<const PageDescriptors*>& pages) {
  std::map<std::string, int> counts;
  for (const auto* p : pages) ++counts[p->entry.printer_id];
  int lo = std::numeric_limits<int>::max();
  for (const auto& [id, n] : counts) lo = std::min(lo, n);
  return counts.empty() ? 0 : lo;
}

inline FeatureMatrix pool_pages(const std::vector<const PageDescriptors*>& pages, int np) {
  FeatureMatrix m;
  m.dim = kPsltdDim;
  for (const auto* p : pages) {
    if (p->skipped) continue;
    for (auto& row : poep_pool(p->letters, np)) m.add(std::move(row));
  }
  return m;
}

/// Prune-mask fit, grid search and final fit on pooled training rows.
inline SvmModel train_model(const FeatureMatrix& pooled, const RunConfig& cfg, int np) {
  std::set<std::string> printers;
  for (const auto& r : pooled.rows) printers.insert(r.label);
  if (printers.size() < 2) throw TrainingError("training needs at least 2 printers");
  const PruneMask mask = fit_prune_mask(pooled);
  TrainOptions opts;
  opts.seed = cfg.seed;
  opts.jobs = cfg.jobs;
  opts.smo = cfg.smo;
  opts.scaling = cfg.scaling;
  SvmModel model = train_ovo(apply_prune(pooled, mask), cfg.grid, opts);
  model.mask = mask;
  model.np = np;
  model.config_hash = cfg.hash(np);
  return model;
}

struct GroupPrediction {
  std::string page_id;
  int group = 0;
  std::string predicted;
};

struct PagePrediction {
  std::string page_id;
  std::string truth;
  std::string predicted;
  std::vector<GroupPrediction> groups;
};

inline PagePrediction predict_page(const SvmModel& model, const PageDescriptors& page) {
  PagePrediction out;
  out.page_id = page.entry.page_id;
  out.truth = page.entry.printer_id;
  std::vector<std::string> labels;
  for (const auto& row : poep_pool(page.letters, model.np)) {
    GroupPrediction g{page.entry.page_id, row.ordinal, predict_full(model, row.values)};
    labels.push_back(g.predicted);
    out.groups.push_back(std::move(g));
  }
  if (!labels.empty()) out.predicted = page_vote(labels);
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrices

struct Confusion {
  std::vector<std::string> classes;
  std::vector<std::vector<int>> counts;  // [truth][predicted]

  explicit Confusion(std::vector<std::string> cls = {})
      : classes(std::move(cls)), counts(classes.size(), std::vector<int>(classes.size(), 0)) {}

  int index(const std::string& label) const {
    auto it = std::find(classes.begin(), classes.end(), label);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
  }

  void add(const std::string& truth, const std::string& predicted) {
    const int t = index(truth), p = index(predicted);
    if (t >= 0 && p >= 0) ++counts[t][p];
  }

  int total() const {
    int n = 0;
    for (const auto& r : counts)
      for (int v : r) n += v;
    return n;
  }

  double accuracy() const {
    int correct = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) correct += counts[i][i];
    const int n = total();
    return n ? static_cast<double>(correct) / n : 0.0;
  }

  double class_accuracy(std::size_t i) const {
    int row = 0;
    for (int v : counts[i]) row += v;
    return row ? static_cast<double>(counts[i][i]) / row : 0.0;
  }

  /// Row-normalized percentages, truth rows by predicted columns.
  void write_csv(std::ostream& out) const {
    std::vector<std::string> header = {"truth\\predicted"};
    header.insert(header.end(), classes.begin(), classes.end());
    csv::write_row(out, header);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      int row = 0;
      for (int v : counts[i]) row += v;
      std::vector<std::string> fields = {classes[i]};
      for (int v : counts[i]) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", row ? 100.0 * v / row : 0.0);
        fields.emplace_back(buf);
      }
      csv::write_row(out, fields);
    }
  }
};

// ---------------------------------------------------------------------------
// Evaluation splits

enum class SplitKind { kfold, same_font, cross_font };

struct SplitSpec {
  SplitKind kind = SplitKind::kfold;
  int folds = 2;
  int repeats = 5;
  std::string font;        // same_font
  std::string train_font;  // cross_font
  std::string test_font;
  int train_pages = 0;     // per printer; 0 = half (same_font) or all (cross_font)
};

struct Split {
  std::vector<std::size_t> train;  // indices into the page list
  std::vector<std::size_t> test;
};

/// Rejects overlapping train/test pages and printers missing from either side.
inline void check_split(const std::vector<PageDescriptors>& pages, const Split& split) {
  std::set<std::string> train_ids, train_printers, test_printers;
  for (auto i : split.train) {
    train_ids.insert(pages[i].entry.page_id);
    train_printers.insert(pages[i].entry.printer_id);
  }
  for (auto i : split.test) {
    if (train_ids.count(pages[i].entry.page_id))
      throw DataError("page " + pages[i].entry.page_id + " appears in both train and test");
    test_printers.insert(pages[i].entry.printer_id);
  }
  std::set<std::string> all;
  for (const auto& p : pages) all.insert(p.entry.printer_id);
  for (const auto& printer : all)
    if (!train_printers.count(printer) || !test_printers.count(printer))
      throw DataError("split leaves printer " + printer + " without train or test pages");
}

inline std::vector<Split> make_splits(const std::vector<PageDescriptors>& pages,
                                      const SplitSpec& spec, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_printer;
  for (std::size_t i = 0; i < pages.size(); ++i)
    if (!pages[i].skipped) by_printer[pages[i].entry.printer_id].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<Split> splits;

  switch (spec.kind) {
    case SplitKind::kfold: {
      if (spec.folds < 2 || spec.repeats < 1) throw ConfigError("eval: need folds >= 2, repeats >= 1");
      for (int rep = 0; rep < spec.repeats; ++rep) {
        std::vector<int> fold_of(pages.size(), -1);
        for (auto& [printer, idx] : by_printer) {
          auto order = idx;
          std::shuffle(order.begin(), order.end(), rng);
          for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = static_cast<int>(p % spec.folds);
        }
        for (int f = 0; f < spec.folds; ++f) {
          Split s;
          for (std::size_t i = 0; i < pages.size(); ++i) {
            if (fold_of[i] < 0) continue;
            (fold_of[i] == f ? s.test : s.train).push_back(i);
          }
          splits.push_back(std::move(s));
        }
      }
      break;
    }
    case SplitKind::same_font: {
      Split s;
      for (auto& [printer, idx] : by_printer) {
        std::vector<std::size_t> tagged;
        for (auto i : idx)
          if (pages[i].entry.font_tag == spec.font) tagged.push_back(i);
        std::shuffle(tagged.begin(), tagged.end(), rng);
        const std::size_t n_train = spec.train_pages > 0 ? static_cast<std::size_t>(spec.train_pages)
                                                         : tagged.size() / 2;
        for (std::size_t p = 0; p < tagged.size(); ++p) (p < n_train ? s.train : s.test).push_back(tagged[p]);
      }
      splits.push_back(std::move(s));
      break;
    }
    case SplitKind::cross_font: {
      Split s;
      for (auto& [printer, idx] : by_printer) {
        std::vector<std::size_t> train, test;
        for (auto i : idx) {
          if (pages[i].entry.font_tag == spec.train_font) train.push_back(i);
          if (pages[i].entry.font_tag == spec.test_font) test.push_back(i);
        }
        std::shuffle(train.begin(), train.end(), rng);
        if (spec.train_pages > 0 && train.size() > static_cast<std::size_t>(spec.train_pages))
          train.resize(static_cast<std::size_t>(spec.train_pages));
        s.train.insert(s.train.end(), train.begin(), train.end());
        s.test.insert(s.test.end(), test.begin(), test.end());
      }
      splits.push_back(std::move(s));
      break;
    }
  }
  for (auto& s : splits) {
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    check_split(pages, s);
  }
  return splits;
}

struct SplitResult {
  int np = 0;
  double cv_accuracy = 0.0;
  double log2_c = 0.0;
  double log2_gamma = 0.0;
  double page_accuracy = 0.0;
  std::vector<PagePrediction> predictions;
};

inline SplitResult run_split(const std::vector<PageDescriptors>& pages, const Split& split,
                             const RunConfig& cfg) {
  std::vector<const PageDescriptors*> train, test;
  for (auto i : split.train) train.push_back(&pages[i]);
  for (auto i : split.test) test.push_back(&pages[i]);
  SplitResult res;
  res.np = resolve_np(cfg.np, min_pages_per_printer(train));
  const SvmModel model = train_model(pool_pages(train, res.np), cfg, res.np);
  res.cv_accuracy = model.cv_accuracy;
  res.log2_c = std::log2(model.c);
  res.log2_gamma = std::log2(model.gamma);
  int correct = 0, scored = 0;
  for (const auto* p : test) {
    if (p->skipped || p->letters.empty()) continue;
    auto pred = predict_page(model, *p);
    ++scored;
    correct += pred.predicted == pred.truth;
    res.predictions.push_back(std::move(pred));
  }
  res.page_accuracy = scored ? static_cast<double>(correct) / scored : 0.0;
  return res;
}

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.96) {
  if (trials == 0) return {0.0, 1.0};
  const double n = trials, p = successes / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct EvalReport {
  std::vector<SplitResult> splits;
  Confusion confusion;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mean_accuracy"] = mean_accuracy;
    j["std_accuracy"] = std_accuracy;
    const auto ci = wilson_interval(
        static_cast<int>(std::lround(confusion.accuracy() * confusion.total())), confusion.total());
    j["pooled_accuracy"] = confusion.accuracy();
    j["pooled_accuracy_ci95"] = {ci.first, ci.second};
    j["chance"] = confusion.classes.empty() ? 0.0 : 1.0 / confusion.classes.size();
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t i = 0; i < confusion.classes.size(); ++i)
      per_class[confusion.classes[i]] = confusion.class_accuracy(i);
    j["per_class_accuracy"] = per_class;
    j["confusion_counts"] = confusion.counts;
    j["classes"] = confusion.classes;
    nlohmann::json sp = nlohmann::json::array();
    for (const auto& s : splits)
      sp.push_back({{"page_accuracy", s.page_accuracy},
                    {"cv_accuracy", s.cv_accuracy},
                    {"np", s.np},
                    {"log2_c", s.log2_c},
                    {"log2_gamma", s.log2_gamma},
                    {"test_pages", s.predictions.size()}});
    j["splits"] = sp;
    return j;
  }
};

inline EvalReport evaluate(const std::vector<PageDescriptors>& pages, const SplitSpec& spec,
                           const RunConfig& cfg) {
  EvalReport report;
  std::set<std::string> printers;
  for (const auto& p : pages)
    if (!p.skipped) printers.insert(p.entry.printer_id);
  report.confusion = Confusion({printers.begin(), printers.end()});
  for (const auto& split : make_splits(pages, spec, cfg.seed)) {
    auto res = run_split(pages, split, cfg);
    for (const auto& pred : res.predictions) report.confusion.add(pred.truth, pred.predicted);
    report.splits.push_back(std::move(res));
  }
  double sum = 0.0, sq = 0.0;
  for (const auto& s : report.splits) sum += s.page_accuracy;
  const double n = static_cast<double>(report.splits.size());
  report.mean_accuracy = n ? sum / n : 0.0;
  for (const auto& s : report.splits) sq += (s.page_accuracy - report.mean_accuracy) * (s.page_accuracy - report.mean_accuracy);
  report.std_accuracy = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
  return report;
}

// ---------------------------------------------------------------------------
// Linear-structure distribution (combined orientation at scale 0)

/// Counts per orientation: horizontal, vertical, 45, 135, none.
using StructureCounts = std::array<long long, kOrientations>;

inline StructureCounts count_structures(const GrayImage& crop, const GaborBank& bank,
                                        const DescriptorParams& params) {
  StructureCounts counts{};
  if (crop.width() < 3 || crop.height() < 3) return counts;
  const GaborField field = apply_bank(crop, bank);
  const GradientMaps maps = gradient_maps(field, params.mag_mode);
  for (int r = 1; r < crop.height() - 1; ++r)
    for (int c = 1; c < crop.width() - 1; ++c) {
      const auto e = combined_orientation(intensity_orientation(crop, r, c, params.t0),
                                          gradient_orientation(maps.direction[0], r, c, params.g0));
      for (int l = 0; l < kOrientations; ++l) counts[l] += e.present(l);
    }
  return counts;
}

inline std::map<std::string, StructureCounts> structure_distribution(
    const std::vector<ManifestEntry>& entries, const RunConfig& cfg) {
  const GaborBank bank = build_bank(cfg.gabor);
  std::vector<StructureCounts> per_page(entries.size());
  parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    const GrayImage page = load_image(entries[i].path, cfg.luma);
    for (const auto& comp : filter_components(extract_components(page, entries[i].page_id), cfg.filter)) {
      const auto c = count_structures(comp.crop, bank, cfg.descriptor);
      for (int l = 0; l < kOrientations; ++l) per_page[i][l] += c[l];
    }
  });
  std::map<std::string, StructureCounts> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& acc = out[entries[i].printer_id];
    for (int l = 0; l < kOrientations; ++l) acc[l] += per_page[i][l];
  }
  return out;
}

}  // namespace psltd
