#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "psltd_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code = -1;
  std::string err;
};

Run cli(const std::string& args) {
  const char* exe = std::getenv("PSLTD_CLI");
  EXPECT_NE(exe, nullptr) << "PSLTD_CLI not set";
  const auto err_path = work() / "stderr.txt";
  const std::string cmd = "cd '" + work().string() + "' && '" + std::string(exe ? exe : "psltd") +
                          "' --quiet " + args + " 2> '" + err_path.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err_path)};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

// Small four-printer corpus shared by every test.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    write(work() / "cfg.json",
          R"({"grid": {"log2c": [-1, 3, 2], "log2g": [-3, 1, 2], "folds": 3}})");
    const auto r = cli("--seed 5 synth --out corpus --pages 3 --glyphs 12 --styles blocky,rounded");
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = lines(work() / "corpus" / "manifest.csv");
    std::string header = rows.front(), blocky = header + "\n", one = header + "\n", unlabeled = header + "\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].find("_blocky_") == std::string::npos) continue;
      blocky += rows[i] + "\n";
      if (rows[i].find("printer-a") != std::string::npos) one += rows[i] + "\n";
      // path,printer_id,page_id,font_tag: blank the label.
      const auto c1 = rows[i].find(','), c2 = rows[i].find(',', c1 + 1);
      unlabeled += rows[i].substr(0, c1 + 1) + rows[i].substr(c2) + "\n";
    }
    write(work() / "corpus" / "blocky.csv", blocky);
    write(work() / "corpus" / "one.csv", one);
    write(work() / "corpus" / "unlabeled.csv", unlabeled);
    write(work() / "corpus" / "empty.csv", header + "\n");
  }
};

}  // namespace

TEST_F(Cli, SynthWritesManifestAndTruth) {
  const auto rows = lines(work() / "corpus" / "manifest.csv");
  ASSERT_EQ(rows.size(), 1u + 4 * 2 * 3);
  EXPECT_EQ(rows.front(), "path,printer_id,page_id,font_tag");
  const auto truth = read_json(work() / "corpus" / "printer-c_rounded_2.truth.json");
  EXPECT_EQ(truth["printer_id"], "printer-c");
  EXPECT_EQ(truth["style"], "rounded");
  EXPECT_EQ(truth["glyph_count"], 12);
  EXPECT_EQ(truth["glyphs"].size(), 12u);
  EXPECT_TRUE(fs::exists(work() / "corpus" / "printer-c_rounded_2.png"));
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(cli("--seed 5 synth --out again --pages 1 --glyphs 12 --styles rounded").code, 0);
  EXPECT_EQ(slurp(work() / "again" / "printer-b_rounded_0.png"),
            slurp(work() / "corpus" / "printer-b_rounded_0.png"));
}

TEST_F(Cli, ExtractRowCountMatchesGroupOracle) {
  ASSERT_EQ(cli("--config cfg.json extract --manifest corpus/blocky.csv --out f5.bin --np 5").code, 0);
  // Clean layouts without speckles: every glyph survives filtering.
  int expected = 0;
  for (const auto& row : lines(work() / "corpus" / "blocky.csv")) {
    const auto c2 = row.find(',', row.find(',') + 1), c3 = row.find(',', c2 + 1);
    if (row.starts_with("path,")) continue;
    const auto truth = read_json(work() / "corpus" / (row.substr(c2 + 1, c3 - c2 - 1) + ".truth.json"));
    expected += (truth["glyph_count"].get<int>() + 4) / 5;
  }
  const auto meta = read_json(work() / "f5.bin.json");
  EXPECT_EQ(meta["count"], expected);
  EXPECT_EQ(meta["np"], 5);
  EXPECT_EQ(meta["dim"], 10856);
  EXPECT_EQ(lines(work() / "f5.bin.csv").size(), static_cast<std::size_t>(expected) + 1);

  ASSERT_EQ(cli("--config cfg.json extract --manifest corpus/blocky.csv --out f0.bin --np 0").code, 0);
  EXPECT_EQ(read_json(work() / "f0.bin.json")["count"], 12);
}

TEST_F(Cli, EmptyManifestIsDataError) {
  const auto r = cli("extract --manifest corpus/empty.csv --out x.bin");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("no pages"), std::string::npos) << r.err;
  EXPECT_EQ(cli("extract --manifest nowhere.csv --out x.bin").code, 3);
}

TEST_F(Cli, SinglePrinterTrainingFails) {
  ASSERT_EQ(cli("--config cfg.json extract --manifest corpus/one.csv --out one.bin --np 4").code, 0);
  const auto r = cli("--config cfg.json train --features one.bin --out one.model");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("2 printers"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainPredictRoundTrip) {
  ASSERT_EQ(cli("--config cfg.json extract --manifest corpus/blocky.csv --out tr.bin --np 4").code, 0);
  ASSERT_EQ(cli("--config cfg.json train --features tr.bin --out m1.json").code, 0);
  ASSERT_EQ(cli("--config cfg.json train --features tr.bin --out m2.json").code, 0);
  EXPECT_EQ(slurp(work() / "m1.json.sv"), slurp(work() / "m2.json.sv"));
  auto a = read_json(work() / "m1.json"), b = read_json(work() / "m2.json");
  a.erase("support_vectors");
  b.erase("support_vectors");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["cv_accuracy"], 1.0);

  ASSERT_EQ(cli("--config cfg.json predict --model m1.json --manifest corpus/blocky.csv --out pred").code, 0);
  const auto pages = lines(work() / "pred.pages.csv");
  ASSERT_EQ(pages.size(), 13u);
  for (std::size_t i = 1; i < pages.size(); ++i) {
    const auto c1 = pages[i].find(','), c2 = pages[i].find(',', c1 + 1);
    EXPECT_EQ(pages[i].substr(c1 + 1, c2 - c1 - 1), pages[i].substr(c2 + 1)) << pages[i];
  }
  EXPECT_EQ(lines(work() / "pred.jsonl").size(), 12u * 3u);
  EXPECT_TRUE(fs::exists(work() / "pred.confusion.csv"));

  ASSERT_EQ(cli("--config cfg.json predict --model m1.json --manifest corpus/unlabeled.csv --out anon").code, 0);
  EXPECT_EQ(lines(work() / "anon.pages.csv").size(), 13u);
  EXPECT_FALSE(fs::exists(work() / "anon.confusion.csv"));

  write(work() / "other.json", R"({"descriptor": {"T0": 25}})");
  const auto r = cli("--config other.json predict --model m1.json --manifest corpus/blocky.csv --out bad");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("hash"), std::string::npos) << r.err;
  EXPECT_EQ(cli("--config other.json train --features tr.bin --out m3.json").code, 2);
}

TEST_F(Cli, EvalCrossStyleAndDisjointness) {
  const auto r = cli("--config cfg.json eval --manifest corpus/manifest.csv --split cross-font "
                     "--train-font blocky --test-font blocky --out same.json");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("both train and test"), std::string::npos) << r.err;

  ASSERT_EQ(cli("--config cfg.json eval --manifest corpus/manifest.csv --split cross-font "
                "--train-font blocky --test-font rounded --out cross.json")
                .code,
            0);
  const auto report = read_json(work() / "cross.json");
  EXPECT_TRUE(report.contains("mean_accuracy"));
  EXPECT_TRUE(fs::exists(work() / "cross.json.confusion.csv"));
}

TEST_F(Cli, DiagCountsPerPrinter) {
  ASSERT_EQ(cli("diag --manifest corpus/blocky.csv --out diag.csv").code, 0);
  const auto rows = lines(work() / "diag.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "printer_id,horizontal,vertical,diag45,diag135,none");
  EXPECT_TRUE(rows[1].starts_with("printer-a,"));
}

TEST_F(Cli, BadArgumentsAreConfigErrors) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("extract --manifest corpus/blocky.csv").code, 2);
  EXPECT_EQ(cli("synth --out z --bit-depth 12").code, 2);
  write(work() / "broken.json", "{ nope");
  EXPECT_EQ(cli("--config broken.json extract --manifest corpus/blocky.csv --out y.bin").code, 2);
  EXPECT_EQ(cli("--config missing.json extract --manifest corpus/blocky.csv --out y.bin").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}
