// psltd: printer attribution from scanned text pages.
//
//   psltd synth   --out DIR            synthetic multi-printer corpus
//   psltd extract --manifest M --out F pooled descriptors
//   psltd train   --features F --out MODEL
//   psltd predict --model MODEL --manifest M --out PREFIX
//   psltd eval    --manifest M --split kfold|same-font|cross-font --out REPORT
//   psltd diag    --manifest M --out CSV

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "psltd/psltd.hpp"

namespace {

using namespace psltd;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool luma = false;
  bool quiet = false;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (g.luma) cfg.luma = true;
  cfg.validate();
  return cfg;
}

std::vector<const PageDescriptors*> pointers(const std::vector<PageDescriptors>& pages) {
  std::vector<const PageDescriptors*> out;
  for (const auto& p : pages) out.push_back(&p);
  return out;
}

int cmd_extract(const Globals& g, const std::string& manifest, const std::string& out,
                std::optional<int> np_override) {
  RunConfig cfg = resolve_config(g);
  if (np_override) cfg.np = *np_override;
  cfg.validate();
  const auto entries = read_manifest(manifest);
  const auto pages = extract_pages(entries, cfg, cache_dir_from_env());
  const auto ptrs = pointers(pages);
  const int np = resolve_np(cfg.np, min_pages_per_printer(ptrs));
  const FeatureMatrix pooled = pool_pages(ptrs, np);
  write_feature_file(out, pooled, {{"config_hash", cfg.hash(np)}, {"np", np}});
  log::info("extract: " + std::to_string(pooled.rows.size()) + " pooled rows from " +
            std::to_string(pages.size()) + " pages (Np=" + std::to_string(np) + ")");
  return 0;
}

int cmd_train(const Globals& g, const std::string& features, const std::string& out) {
  const RunConfig cfg = resolve_config(g);
  auto loaded = read_feature_file(features);
  const int np = loaded.meta.at("np").get<int>();
  if (loaded.meta.at("config_hash").get<std::string>() != cfg.hash(np))
    throw ConfigError("feature file was extracted with a different configuration");
  const SvmModel model = train_model(loaded.matrix, cfg, np);
  save_model(model, out);
  std::ostringstream msg;
  msg << "log2c,log2g,cv_accuracy\n";
  for (const auto& cell : model.cv_table)
    msg << cell.log2_c << ',' << cell.log2_gamma << ',' << cell.accuracy << '\n';
  msg << "best: C=" << model.c << " gamma=" << model.gamma << " cv_accuracy=" << model.cv_accuracy;
  log::info(msg.str());
  return 0;
}

int cmd_predict(const Globals& g, const std::string& model_path, const std::string& manifest,
                const std::string& out) {
  const RunConfig cfg = resolve_config(g);
  const SvmModel model = load_model(model_path);
  if (model.config_hash != cfg.hash(model.np))
    throw ConfigError("model was trained with a different configuration (hash mismatch)");
  const auto pages = extract_pages(read_manifest(manifest), cfg, cache_dir_from_env());

  std::ofstream jsonl(out + ".jsonl");
  std::ofstream page_csv(out + ".pages.csv");
  if (!jsonl || !page_csv) throw DataError("cannot write predictions under " + out);
  csv::write_row(page_csv, {"page_id", "truth", "predicted"});
  bool labeled = true;
  Confusion confusion(model.classes);
  for (const auto& page : pages) {
    if (page.skipped || page.letters.empty()) continue;
    const auto pred = predict_page(model, page);
    for (const auto& grp : pred.groups)
      jsonl << nlohmann::json{{"page_id", grp.page_id}, {"group", grp.group}, {"predicted", grp.predicted}}.dump()
            << '\n';
    csv::write_row(page_csv, {pred.page_id, pred.truth, pred.predicted});
    if (pred.truth.empty()) labeled = false;
    else confusion.add(pred.truth, pred.predicted);
  }
  if (labeled) {
    std::ofstream conf(out + ".confusion.csv");
    confusion.write_csv(conf);
    log::info("page accuracy: " + std::to_string(confusion.accuracy()));
  }
  return 0;
}

int cmd_eval(const Globals& g, const std::string& manifest, const SplitSpec& split,
             const std::string& out) {
  const RunConfig cfg = resolve_config(g);
  const auto pages = extract_pages(read_manifest(manifest), cfg, cache_dir_from_env());
  const EvalReport report = evaluate(pages, split, cfg);
  std::ofstream(out) << report.to_json().dump(2) << '\n';
  std::ofstream conf(out + ".confusion.csv");
  report.confusion.write_csv(conf);
  std::ostringstream msg;
  msg << "mean page accuracy " << report.mean_accuracy << " (std " << report.std_accuracy
      << ") over " << report.splits.size() << " split(s)";
  log::info(msg.str());
  return 0;
}

std::vector<PrinterProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profiles " + path);
  std::vector<PrinterProfile> out;
  try {
    for (const auto& p : nlohmann::json::parse(in)) {
      PrinterProfile prof;
      prof.id = p.at("id").get<std::string>();
      prof.seed = p.value("seed", std::uint64_t{0});
      prof.toner_sigma = p.value("toner_sigma", 0.0);
      prof.dot_gain = p.value("dot_gain", 0.0);
      prof.banding_amplitude = p.value("banding_amplitude", 0.0);
      prof.banding_period = p.value("banding_period", 0.0);
      prof.edge_raggedness = p.value("edge_raggedness", 0.0);
      prof.base_darkness = p.value("base_darkness", 0.0);
      prof.validate();
      out.push_back(prof);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("profiles: ") + e.what());
  }
  return out;
}

int cmd_synth(const Globals& g, const std::string& out, CorpusSpec spec,
              const std::vector<std::string>& styles, const std::string& profiles) {
  const RunConfig cfg = resolve_config(g);
  spec.seed = cfg.seed;
  spec.styles.clear();
  for (const auto& s : styles) spec.styles.push_back(parse_style(s));
  if (!profiles.empty()) spec.printers = load_profiles(profiles);
  const auto entries = write_corpus(out, spec, cfg.jobs);
  log::info("synth: wrote " + std::to_string(entries.size()) + " pages to " + out);
  return 0;
}

int cmd_diag(const Globals& g, const std::string& manifest, const std::string& out) {
  const RunConfig cfg = resolve_config(g);
  const auto dist = structure_distribution(read_manifest(manifest), cfg);
  std::ofstream csv_out(out);
  if (!csv_out) throw DataError("cannot write " + out);
  csv::write_row(csv_out, {"printer_id", "horizontal", "vertical", "diag45", "diag135", "none"});
  for (const auto& [printer, c] : dist)
    csv::write_row(csv_out, {printer, std::to_string(c[0]), std::to_string(c[1]),
                             std::to_string(c[2]), std::to_string(c[3]), std::to_string(c[4])});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Printer attribution with printer-specific local texture descriptors"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed for folds, splits and synthesis");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--luma", g.luma, "Accept color images via BT.601 luma");
  app.add_flag("--quiet", g.quiet, "Suppress progress and warnings");

  std::string manifest, out, features, model;
  std::optional<int> np;

  auto* extract = app.add_subcommand("extract", "Extract pooled descriptors from a manifest");
  extract->add_option("--manifest", manifest)->required();
  extract->add_option("--out", out, "Feature file (writes .csv and .json sidecars)")->required();
  extract->add_option("--np", np, "Letters per pooled group; 0 = whole page");

  auto* train = app.add_subcommand("train", "Train the one-vs-one SVM");
  train->add_option("--features", features)->required();
  train->add_option("--out", out, "Model file")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Predict source printers of pages");
  predict_cmd->add_option("--model", model)->required();
  predict_cmd->add_option("--manifest", manifest)->required();
  predict_cmd->add_option("--out", out, "Output prefix")->required();

  SplitSpec split;
  std::string split_kind = "kfold";
  auto* eval = app.add_subcommand("eval", "Train/test evaluation over page splits");
  eval->add_option("--manifest", manifest)->required();
  eval->add_option("--out", out, "Report JSON")->required();
  eval->add_option("--split", split_kind)->check(CLI::IsMember({"kfold", "same-font", "cross-font"}));
  eval->add_option("--folds", split.folds);
  eval->add_option("--repeats", split.repeats);
  eval->add_option("--font", split.font);
  eval->add_option("--train-font", split.train_font);
  eval->add_option("--test-font", split.test_font);
  eval->add_option("--train-pages", split.train_pages);

  CorpusSpec corpus;
  std::vector<std::string> styles = {"blocky"};
  std::string profiles;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic printer corpus");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--pages", corpus.pages_per_style, "Pages per printer and style");
  synth->add_option("--glyphs", corpus.glyphs_per_page);
  synth->add_option("--speckles", corpus.speckles_per_page);
  synth->add_option("--styles", styles)->delimiter(',');
  synth->add_option("--bit-depth", corpus.bit_depth)->check(CLI::IsMember({8, 16}));
  synth->add_option("--profiles", profiles, "JSON array of printer profiles");

  auto* diag = app.add_subcommand("diag", "Linear-structure distribution per printer");
  diag->add_option("--manifest", manifest)->required();
  diag->add_option("--out", out, "CSV report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  log::set_quiet(g.quiet);

  try {
    if (*extract) return cmd_extract(g, manifest, out, np);
    if (*train) return cmd_train(g, features, out);
    if (*predict_cmd) return cmd_predict(g, model, manifest, out);
    if (*eval) {
      split.kind = split_kind == "kfold"       ? SplitKind::kfold
                   : split_kind == "same-font" ? SplitKind::same_font
                                               : SplitKind::cross_font;
      return cmd_eval(g, manifest, split, out);
    }
    if (*synth) return cmd_synth(g, out, corpus, styles, profiles);
    if (*diag) return cmd_diag(g, manifest, out);
  } catch (const psltd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
