#pragma once

// One-vs-one RBF SVM ensemble: feature scaling, stratified grid search,
// prediction by pairwise voting and page-level majority vote.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psltd/features.hpp"
#include "psltd/parallel.hpp"
#include "psltd/svm.hpp"

namespace psltd {

struct GridSearchSpec {
  std::vector<int> log2_c = {-5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15};
  std::vector<int> log2_gamma = {-15, -13, -11, -9, -7, -5, -3, -1, 1, 3};
  int folds = 5;

  static std::vector<int> range(int lo, int hi, int step) {
    std::vector<int> out;
    for (int v = lo; v <= hi; v += step) out.push_back(v);
    return out;
  }

  void validate() const {
    if (log2_c.empty() || log2_gamma.empty()) throw ConfigError("grid: empty C or gamma grid");
    for (const auto* g : {&log2_c, &log2_gamma})
      for (std::size_t i = 1; i < g->size(); ++i)
        if ((*g)[i] - (*g)[i - 1] != 2) throw ConfigError("grid: values must ascend in steps of 2");
    if (folds < 2) throw ConfigError("grid: need at least 2 folds");
  }
};

/// Descriptor entries are histogram frequencies already in [0, 1]; min/max
/// rescaling is available but stretches dims that barely vary in training.
enum class Scaling { none, minmax };

inline std::string_view scaling_name(Scaling s) { return s == Scaling::minmax ? "minmax" : "none"; }

inline Scaling parse_scaling(std::string_view name) {
  if (name == "none") return Scaling::none;
  if (name == "minmax") return Scaling::minmax;
  throw ConfigError("unknown scaling '" + std::string(name) + "' (expected none or minmax)");
}

struct TrainOptions {
  Scaling scaling = Scaling::none;
  std::uint64_t seed = 1;
  int jobs = 1;
  SmoOptions smo;
};

struct PairMachine {
  int pos = 0;  // class index voted for when f > 0
  int neg = 0;
  std::vector<std::vector<double>> support;  // scaled, pruned, float32-rounded
  std::vector<double> coef;                  // alpha_i * y_i
  std::vector<int> support_rows;             // training row indices (in-memory only)
  double rho = 0.0;
};

struct CvCell {
  int log2_c = 0;
  int log2_gamma = 0;
  double accuracy = 0.0;
};

struct SvmModel {
  std::vector<std::string> classes;
  double c = 1.0;
  double gamma = 1.0;
  Scaling scaling = Scaling::none;
  std::vector<double> scale_min;
  std::vector<double> scale_max;
  PruneMask mask;
  std::vector<PairMachine> machines;
  std::vector<CvCell> cv_table;
  double cv_accuracy = 0.0;
  int np = 0;
  std::string config_hash;

  int pruned_dim() const { return static_cast<int>(scale_min.size()); }
};

struct FeatureScaling {
  std::vector<double> lo, hi;

  static FeatureScaling fit(const std::vector<std::vector<double>>& rows,
                            Scaling mode = Scaling::minmax) {
    FeatureScaling s;
    if (rows.empty()) return s;
    if (mode == Scaling::none) {
      s.lo.assign(rows.front().size(), 0.0);
      s.hi.assign(rows.front().size(), 1.0);
      return s;
    }
    s.lo = rows.front();
    s.hi = rows.front();
    for (const auto& r : rows)
      for (std::size_t d = 0; d < r.size(); ++d) {
        s.lo[d] = std::min(s.lo[d], r[d]);
        s.hi[d] = std::max(s.hi[d], r[d]);
      }
    return s;
  }
};

/// Maps each dimension by (x - lo) / (hi - lo); constant dims map to 0.
inline std::vector<double> scale_vector(std::span<const double> x, std::span<const double> lo,
                                        std::span<const double> hi) {
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d)
    out[d] = hi[d] > lo[d] ? (x[d] - lo[d]) / (hi[d] - lo[d]) : 0.0;
  return out;
}

/// Stratified fold assignment: each class is shuffled with `seed` and dealt
/// round-robin.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int n_classes, int folds,
                                         std::uint64_t seed) {
  std::vector<int> fold(labels.size(), 0);
  std::mt19937_64 rng(seed);
  for (int cls = 0; cls < n_classes; ++cls) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(static_cast<int>(i));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t p = 0; p < idx.size(); ++p) fold[idx[p]] = static_cast<int>(p % folds);
  }
  return fold;
}

namespace detail {

struct PairFit {
  int pos = 0;
  int neg = 0;
  std::vector<int> rows;  // indices into the kernel matrix
  std::vector<int> y;
  SmoSolution sol;

  double decision(const KernelMatrix& k, int t) const {
    double v = -sol.rho;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (sol.alpha[r] != 0.0) v += sol.alpha[r] * y[r] * k(rows[r], t);
    return v;
  }
};

/// Trains every class pair (a < b, row-major) on `subset` (kernel-matrix
/// indices).
inline std::vector<PairFit> fit_pairs(const KernelMatrix& k, const std::vector<int>& labels,
                                      const std::vector<int>& subset, int n_classes, double c,
                                      const SmoOptions& smo) {
  std::vector<PairFit> fits;
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      PairFit fit;
      fit.pos = a;
      fit.neg = b;
      for (int i : subset) {
        if (labels[i] == a || labels[i] == b) {
          fit.rows.push_back(i);
          fit.y.push_back(labels[i] == a ? 1 : -1);
        }
      }
      KernelMatrix sub(static_cast<int>(fit.rows.size()));
      for (int i = 0; i < sub.n; ++i)
        for (int j = 0; j < sub.n; ++j) sub(i, j) = k(fit.rows[i], fit.rows[j]);
      fit.sol = solve_smo(sub, fit.y, c, smo);
      fits.push_back(std::move(fit));
    }
  }
  return fits;
}

}  // namespace detail

/// Pairwise vote over decision values ordered (0,1), (0,2), ..., (1,2), ...
/// Ties go to the largest summed signed margin, then the lowest class index.
inline int vote_decisions(std::span<const double> decisions, int n_classes) {
  std::vector<int> votes(n_classes, 0);
  std::vector<double> margin(n_classes, 0.0);
  std::size_t p = 0;
  for (int a = 0; a < n_classes; ++a)
    for (int b = a + 1; b < n_classes; ++b, ++p) {
      const double f = decisions[p];
      ++votes[f > 0 ? a : b];
      margin[a] += f;
      margin[b] -= f;
    }
  int best = 0;
  for (int cls = 1; cls < n_classes; ++cls)
    if (votes[cls] > votes[best] || (votes[cls] == votes[best] && margin[cls] > margin[best]))
      best = cls;
  return best;
}

/// Mean over folds of per-fold accuracy for one (C, kernel) setting.
inline double cross_validate(const KernelMatrix& k, const std::vector<int>& labels,
                             const std::vector<int>& fold, int folds, int n_classes, double c,
                             const SmoOptions& smo) {
  double acc_sum = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i)
      (fold[i] == f ? test : train).push_back(static_cast<int>(i));
    const auto fits = detail::fit_pairs(k, labels, train, n_classes, c, smo);
    int correct = 0;
    std::vector<double> dec(fits.size());
    for (int t : test) {
      for (std::size_t p = 0; p < fits.size(); ++p) dec[p] = fits[p].decision(k, t);
      correct += vote_decisions(dec, n_classes) == labels[t];
    }
    acc_sum += test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return acc_sum / folds;
}

/// Grid search over (C, gamma) with stratified k-fold CV, then a final fit on
/// all rows. Ties in CV accuracy prefer smaller C, then smaller gamma. The
/// returned model carries no prune mask; callers attach the one they fitted.
inline SvmModel train_ovo(const FeatureMatrix& train, const GridSearchSpec& spec,
                          const TrainOptions& options = {}) {
  spec.validate();
  std::vector<std::string> classes;
  for (const auto& r : train.rows) classes.push_back(r.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw TrainingError("train: need at least 2 printer classes");

  std::vector<int> labels;
  std::vector<int> per_class(classes.size(), 0);
  for (const auto& r : train.rows) {
    const int cls = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), r.label) -
                                     classes.begin());
    labels.push_back(cls);
    ++per_class[cls];
  }
  for (std::size_t cls = 0; cls < classes.size(); ++cls)
    if (per_class[cls] < spec.folds)
      throw TrainingError("train: class '" + classes[cls] + "' has " +
                          std::to_string(per_class[cls]) + " rows, fewer than " +
                          std::to_string(spec.folds) + " folds");

  std::vector<std::vector<double>> raw;
  raw.reserve(train.rows.size());
  for (const auto& r : train.rows) raw.push_back(r.values);
  const FeatureScaling scaling = FeatureScaling::fit(raw, options.scaling);
  std::vector<std::vector<double>> scaled;
  scaled.reserve(raw.size());
  for (const auto& r : raw) scaled.push_back(scale_vector(r, scaling.lo, scaling.hi));
  const KernelMatrix sqdist = squared_distances(scaled);

  const int n_classes = static_cast<int>(classes.size());
  const auto fold = stratified_folds(labels, n_classes, spec.folds, options.seed);
  std::vector<int> lc = spec.log2_c, lg = spec.log2_gamma;
  std::sort(lc.begin(), lc.end());
  std::sort(lg.begin(), lg.end());

  std::vector<CvCell> table(lc.size() * lg.size());
  parallel_for(lg.size(), options.jobs, [&](std::size_t gi) {
    const KernelMatrix k = rbf_from_distances(sqdist, std::ldexp(1.0, lg[gi]));
    for (std::size_t ci = 0; ci < lc.size(); ++ci) {
      CvCell& cell = table[ci * lg.size() + gi];
      cell.log2_c = lc[ci];
      cell.log2_gamma = lg[gi];
      cell.accuracy = cross_validate(k, labels, fold, spec.folds, n_classes,
                                     std::ldexp(1.0, lc[ci]), options.smo);
    }
  });

  const CvCell* best = &table.front();
  for (const auto& cell : table)
    if (cell.accuracy > best->accuracy) best = &cell;

  SvmModel model;
  model.classes = classes;
  model.c = std::ldexp(1.0, best->log2_c);
  model.gamma = std::ldexp(1.0, best->log2_gamma);
  model.scaling = options.scaling;
  model.scale_min = scaling.lo;
  model.scale_max = scaling.hi;
  model.cv_table = table;
  model.cv_accuracy = best->accuracy;

  const KernelMatrix k = rbf_from_distances(sqdist, model.gamma);
  std::vector<int> all(labels.size());
  std::iota(all.begin(), all.end(), 0);
  for (auto& fit : detail::fit_pairs(k, labels, all, n_classes, model.c, options.smo)) {
    PairMachine pm;
    pm.pos = fit.pos;
    pm.neg = fit.neg;
    pm.rho = fit.sol.rho;
    for (std::size_t r = 0; r < fit.rows.size(); ++r) {
      if (fit.sol.alpha[r] == 0.0) continue;
      // Held at the precision the model file stores.
      auto& sv = pm.support.emplace_back(scaled[fit.rows[r]]);
      for (double& v : sv) v = static_cast<float>(v);
      pm.coef.push_back(fit.sol.alpha[r] * fit.y[r]);
      pm.support_rows.push_back(fit.rows[r]);
    }
    model.machines.push_back(std::move(pm));
  }
  return model;
}

inline double machine_decision(const PairMachine& pm, std::span<const double> scaled, double gamma) {
  double v = -pm.rho;
  for (std::size_t s = 0; s < pm.support.size(); ++s) v += pm.coef[s] * rbf(pm.support[s], scaled, gamma);
  return v;
}

/// Decision value of every pairwise machine for a pruned (unscaled) vector.
inline std::vector<double> decision_values(const SvmModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.pruned_dim())
    throw DataError("predict: vector dimension " + std::to_string(x.size()) +
                    " does not match model dimension " + std::to_string(model.pruned_dim()));
  const auto scaled = scale_vector(x, model.scale_min, model.scale_max);
  std::vector<double> dec;
  dec.reserve(model.machines.size());
  for (const auto& pm : model.machines) dec.push_back(machine_decision(pm, scaled, model.gamma));
  return dec;
}

/// Predicts from a pruned vector.
inline std::string predict(const SvmModel& model, std::span<const double> x) {
  const auto dec = decision_values(model, x);
  return model.classes[vote_decisions(dec, static_cast<int>(model.classes.size()))];
}

/// Predicts from a full-dimension vector, applying the model's prune mask.
inline std::string predict_full(const SvmModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.mask.source_dim)
    throw DataError("predict: descriptor dimension does not match model prune mask");
  return predict(model, project(x, model.mask));
}

/// Modal label; ties go to the tied label seen earliest in the list.
inline std::string page_vote(const std::vector<std::string>& labels) {
  if (labels.empty()) throw DataError("page_vote: no group predictions");
  std::map<std::string, int> counts;
  for (const auto& l : labels) ++counts[l];
  int top = 0;
  for (const auto& [l, n] : counts) top = std::max(top, n);
  for (const auto& l : labels)
    if (counts[l] == top) return l;
  return labels.front();
}

/// KKT audit of every pairwise machine against the (pruned) training rows
/// it was fitted on. Margins are recomputed from the stored support vectors.
inline double max_kkt_violation(const SvmModel& model, const FeatureMatrix& pruned_train) {
  double worst = 0.0;
  for (const auto& pm : model.machines) {
    std::map<int, double> alpha_of;
    for (std::size_t s = 0; s < pm.support_rows.size(); ++s)
      alpha_of[pm.support_rows[s]] = std::abs(pm.coef[s]);
    std::vector<double> alpha, margins;
    std::vector<int> y;
    double eq = 0.0;
    for (std::size_t i = 0; i < pruned_train.rows.size(); ++i) {
      const auto& row = pruned_train.rows[i];
      int yi = 0;
      if (row.label == model.classes[pm.pos]) yi = 1;
      else if (row.label == model.classes[pm.neg]) yi = -1;
      else continue;
      const auto scaled = scale_vector(row.values, model.scale_min, model.scale_max);
      auto it = alpha_of.find(static_cast<int>(i));
      const double a = it == alpha_of.end() ? 0.0 : it->second;
      alpha.push_back(a);
      y.push_back(yi);
      margins.push_back(yi * machine_decision(pm, scaled, model.gamma));
      eq += a * yi;
    }
    const auto rep = kkt_audit(alpha, y, margins, model.c);
    if (!rep.box_ok || rep.equality_residual > 1e-6) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, rep.max_violation);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Model file: JSON envelope at `path`, support vectors in `path.sv` using the
// descriptor row format.

inline constexpr int kModelFormatVersion = 1;

inline void save_model(const SvmModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = kModelFormatVersion;
  j["classes"] = model.classes;
  j["C"] = model.c;
  j["gamma"] = model.gamma;
  j["scaling"] = scaling_name(model.scaling);
  j["scale_min"] = model.scale_min;
  j["scale_max"] = model.scale_max;
  j["prune_mask"] = model.mask.to_json();
  j["np"] = model.np;
  j["config_hash"] = model.config_hash;
  j["cv_accuracy"] = model.cv_accuracy;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& cell : model.cv_table)
    table.push_back({{"log2_c", cell.log2_c}, {"log2_gamma", cell.log2_gamma}, {"accuracy", cell.accuracy}});
  j["cv_table"] = table;

  std::vector<std::vector<double>> sv_rows;
  nlohmann::json machines = nlohmann::json::array();
  for (const auto& pm : model.machines) {
    machines.push_back({{"pos", pm.pos},
                        {"neg", pm.neg},
                        {"rho", pm.rho},
                        {"sv_offset", sv_rows.size()},
                        {"sv_count", pm.support.size()},
                        {"coef", pm.coef}});
    for (const auto& s : pm.support) sv_rows.push_back(s);
  }
  j["machines"] = machines;
  const auto sv_path = std::filesystem::path(path.string() + ".sv");
  j["support_vectors"] = sv_path.filename().string();
  write_rows_binary(sv_path, sv_rows, model.pruned_dim());

  std::ofstream out(path);
  if (!out) throw DataError("cannot write model " + path.string());
  out << j.dump(1) << '\n';
}

inline SvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw DataError("unsupported model version in " + path.string());
  SvmModel model;
  model.classes = j.at("classes").get<std::vector<std::string>>();
  model.c = j.at("C").get<double>();
  model.gamma = j.at("gamma").get<double>();
  model.scaling = parse_scaling(j.value("scaling", std::string("minmax")));
  model.scale_min = j.at("scale_min").get<std::vector<double>>();
  model.scale_max = j.at("scale_max").get<std::vector<double>>();
  model.mask = PruneMask::from_json(j.at("prune_mask"));
  model.np = j.at("np").get<int>();
  model.config_hash = j.at("config_hash").get<std::string>();
  model.cv_accuracy = j.at("cv_accuracy").get<double>();
  for (const auto& cell : j.at("cv_table"))
    model.cv_table.push_back({cell.at("log2_c").get<int>(), cell.at("log2_gamma").get<int>(),
                              cell.at("accuracy").get<double>()});
  const auto sv_path = path.parent_path() / j.at("support_vectors").get<std::string>();
  const auto sv_rows = read_rows_binary(sv_path);
  for (const auto& m : j.at("machines")) {
    PairMachine pm;
    pm.pos = m.at("pos").get<int>();
    pm.neg = m.at("neg").get<int>();
    pm.rho = m.at("rho").get<double>();
    pm.coef = m.at("coef").get<std::vector<double>>();
    const auto offset = m.at("sv_offset").get<std::size_t>();
    const auto count = m.at("sv_count").get<std::size_t>();
    if (offset + count > sv_rows.size() || count != pm.coef.size())
      throw DataError("model support vectors inconsistent with " + path.string());
    pm.support.assign(sv_rows.begin() + static_cast<std::ptrdiff_t>(offset),
                      sv_rows.begin() + static_cast<std::ptrdiff_t>(offset + count));
    model.machines.push_back(std::move(pm));
  }
  const std::size_t k = model.classes.size();
  if (model.machines.size() != k * (k - 1) / 2)
    throw DataError("model machine count does not match class count");
  if (static_cast<int>(model.mask.kept.size()) != model.pruned_dim())
    throw DataError("model prune mask does not match scaling bounds");
  return model;
}

}  // namespace psltd
