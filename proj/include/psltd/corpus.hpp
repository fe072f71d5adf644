#pragma once

// Writes synthetic multi-printer corpora to disk: page PNGs, a manifest and a
// truth.json per page.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psltd/image_io.hpp"
#include "psltd/parallel.hpp"
#include "psltd/pipeline.hpp"
#include "psltd/synthgen.hpp"

namespace psltd {

struct CorpusSpec {
  std::vector<PrinterProfile> printers = preset_profiles();
  std::vector<GlyphStyle> styles = {GlyphStyle::blocky};
  int pages_per_style = 5;  // per printer
  int glyphs_per_page = 60;
  int speckles_per_page = 0;
  int bit_depth = 8;
  std::uint64_t seed = 1;
  std::string id_prefix;  // prepended to page ids
};

inline nlohmann::json box_json(const BoundingBox& b) { return {b.x0, b.y0, b.w, b.h}; }

/// Page seeds depend on (seed, style, page index) only, so every printer
/// prints the same layouts and a page does not change with the corpus shape.
inline std::vector<ManifestEntry> write_corpus(const std::filesystem::path& dir,
                                               const CorpusSpec& spec, int jobs = 1) {
  std::filesystem::create_directories(dir);
  struct Job {
    const PrinterProfile* printer;
    GlyphStyle style;
    int page;
  };
  std::vector<Job> work;
  for (const auto& p : spec.printers)
    for (auto style : spec.styles)
      for (int i = 0; i < spec.pages_per_style; ++i) work.push_back({&p, style, i});

  std::vector<ManifestEntry> entries(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t w) {
    const Job& job = work[w];
    const std::string style(style_name(job.style));
    const std::string page_id =
        spec.id_prefix + job.printer->id + "_" + style + "_" + std::to_string(job.page);
    const std::uint64_t layout_seed =
        detail::mix_seed(spec.seed, static_cast<std::uint64_t>(job.style) * 100003u + job.page);
    RenderSpec rs;
    rs.glyph_count = spec.glyphs_per_page;
    rs.style = job.style;
    rs.layout_seed = layout_seed;
    rs.speckles = spec.speckles_per_page;
    const RenderedPage clean = render_page(rs);
    GrayImage base = clean.image;
    if (spec.bit_depth == 16) {
      std::vector<std::uint16_t> wide(base.samples().begin(), base.samples().end());
      for (auto& v : wide) v = static_cast<std::uint16_t>(v * 257u);
      base = GrayImage(base.width(), base.height(), 16, std::move(wide));
    }
    const GrayImage printed =
        apply_profile(base, *job.printer, layout_seed);
    const auto image_path = dir / (page_id + ".png");
    save_png(printed, image_path);

    nlohmann::json truth;
    truth["page_id"] = page_id;
    truth["printer_id"] = job.printer->id;
    truth["style"] = style;
    truth["glyph_count"] = clean.glyphs.size();
    nlohmann::json glyphs = nlohmann::json::array();
    for (std::size_t g = 0; g < clean.glyphs.size(); ++g)
      glyphs.push_back({{"bbox", box_json(clean.glyphs[g])}, {"ink", clean.glyph_ink[g]}});
    truth["glyphs"] = glyphs;
    nlohmann::json speckles = nlohmann::json::array();
    for (const auto& s : clean.speckles) speckles.push_back(box_json(s));
    truth["speckles"] = speckles;
    truth["ink_pixels"] = clean.ink.count();
    std::ofstream(dir / (page_id + ".truth.json")) << truth.dump(1) << '\n';

    entries[w] = {image_path, job.printer->id, page_id, style};
  });
  write_manifest(dir / "manifest.csv", entries);
  return entries;
}

}  // namespace psltd
