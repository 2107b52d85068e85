#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "shadowae/cli.hpp"
#include "shadowae/imageio.hpp"
#include "shadowae/model.hpp"

namespace fs = std::filesystem;
using namespace shadowae;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "shadowae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SHADOWAE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

// Small corpus and model shared by the tests below.
struct Fixture {
  fs::path dir;
  fs::path corpus, run;
  Fixture() {
    dir = oracle::scratch_dir("cli");
    corpus = dir / "corpus";
    run = dir / "run";
    write_json(dir / "spec.json", {{"spec", {{"width", 32}, {"height", 32}}}});
    REQUIRE(run_cli({"synth", "--config", (dir / "spec.json").string(), "--train", "10", "--eval", "4",
                     "--seed", "7", "--out", corpus.string()})
                .code == 0);
    write_json(dir / "train.json", {{"enc_channels", {4, 8}}, {"batch_size", 4}, {"epochs", 2}});
    REQUIRE(run_cli({"train", "--config", (dir / "train.json").string(), "--corpus", corpus.string(), "--out",
                     run.string()})
                .code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("version and usage") {
  const auto v = run_cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("checkpoint format 1") != std::string::npos);
  CHECK(v.out.find("corpus manifest 1") != std::string::npos);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(run_cli({"eval", "--tau", "0.5", "--select-tau", "--out", "x"}).code == cli::kExitUsage);
}

TEST_CASE("the installed binary maps outcomes to exit codes") {
  const auto dir = oracle::scratch_dir("cli_codes");
  CHECK(run_binary("--version") == 0);
  CHECK(run_binary("--bogus") == 1);
  CHECK(run_binary("eval --checkpoint " + (dir / "missing.shdw").string() + " --corpus " +
                   (dir / "nowhere").string() + " --out " + (dir / "e").string()) == 2);
}

TEST_CASE("synth writes the requested corpus, deterministically") {
  const auto dir = oracle::scratch_dir("cli_synth");
  for (const char* name : {"a", "b"})
    REQUIRE(run_cli({"synth", "--train", "6", "--eval", "3", "--seed", "7", "--out", (dir / name).string()}).code == 0);
  const auto m = load_manifest(dir / "a");
  CHECK(m.entries.size() == 9);
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    // config.json echoes the output directory, so it differs by design.
    if (!e.is_regular_file() || e.path().filename() == "config.json") continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    CHECK(oracle::read_bytes(e.path()) == oracle::read_bytes(dir / "b" / rel));
  }
  const auto echo = nlohmann::json::parse(oracle::read_bytes(dir / "a" / "config.json"));
  CHECK(echo.at("train") == 6);
  CHECK(echo.at("seed") == 7);
}

TEST_CASE("synth into a missing parent fails without writing") {
  const auto dir = oracle::scratch_dir("cli_synth_bad");
  const auto r = run_cli({"synth", "--train", "2", "--eval", "1", "--out", (dir / "no" / "corpus").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK_FALSE(r.err.empty());
  CHECK_FALSE(fs::exists(dir / "no"));
}

TEST_CASE("unknown config keys are usage errors") {
  const auto dir = oracle::scratch_dir("cli_keys");
  write_json(dir / "bad.json", {{"epochz", 3}});
  CHECK(run_cli({"train", "--config", (dir / "bad.json").string(), "--corpus", "x", "--out", "y"}).code ==
        cli::kExitUsage);
  write_json(dir / "bad_eval.json", {{"tua", 0.3}});
  CHECK(run_cli({"eval", "--config", (dir / "bad_eval.json").string(), "--out", "y"}).code == cli::kExitUsage);
}

TEST_CASE("train with zero epochs gives the initial parameters") {
  auto& f = fixture();
  const auto out = f.dir / "zero";
  REQUIRE(run_cli({"train", "--config", (f.dir / "train.json").string(), "--corpus", f.corpus.string(), "--out",
                   out.string(), "--epochs", "0"})
              .code == 0);
  const auto ck = load_checkpoint(out / "final.shdw");
  CHECK(ck.step == 0);
  ArchConfig a;
  a.height = a.width = 32;
  a.enc_channels = {4, 8};
  Rng rng(1, "init");
  const auto want = init_params(a, rng, he_gain(a.slope));
  ck.params.for_each([&](const std::string& name, const Tensor<float>& t) {
    want.for_each([&](const std::string& n2, const Tensor<float>& t2) {
      if (n2 == name) CHECK(t.storage() == t2.storage());
    });
  });
}

TEST_CASE("train log has one row per step and flags override the config file") {
  auto& f = fixture();
  std::ifstream log(f.run / "train_log.csv");
  std::size_t rows = 0;
  for (std::string l; std::getline(log, l);) ++rows;
  CHECK(rows == 1 + steps_per_epoch(10, 4) * 2);
  const auto echo = nlohmann::json::parse(oracle::read_bytes(f.run / "config.json"));
  CHECK(echo.at("epochs") == 2);
  CHECK(echo.at("batch_size") == 4);
}

TEST_CASE("eval writes reports, deterministically") {
  auto& f = fixture();
  for (const char* name : {"e1", "e2"})
    REQUIRE(run_cli({"eval", "--checkpoint", (f.run / "final.shdw").string(), "--corpus", f.corpus.string(), "--out",
                     (f.dir / name).string(), "--select-tau", "--baseline-select", "--overlays", "2"})
                .code == 0);
  for (const char* file : {"report.json", "report.csv", "overlays/overlay_00000.png"})
    CHECK(oracle::read_bytes(f.dir / "e1" / file) == oracle::read_bytes(f.dir / "e2" / file));
  const auto report = nlohmann::json::parse(oracle::read_bytes(f.dir / "e1" / "report.json"));
  for (const char* key : {"proposed", "baseline", "tau_selection", "baseline_selection", "cavity_false_positives"})
    CHECK(report.contains(key));
  const auto iou = report.at("proposed").at("iou").at("mean").get<double>();
  CHECK(iou >= 0.0);
  CHECK(iou <= 1.0);
  std::istringstream csv(oracle::read_bytes(f.dir / "e1" / "report.csv"));
  std::string header, row1, row2;
  std::getline(csv, header);
  std::getline(csv, row1);
  std::getline(csv, row2);
  CHECK(header == "method,threshold,iou_mean,iou_std,dice_mean,dice_std");
  CHECK(row1.rfind("proposed,", 0) == 0);
  CHECK(row2.rfind("threshold,", 0) == 0);
}

TEST_CASE("fixed baseline threshold adds the baseline row") {
  auto& f = fixture();
  REQUIRE(run_cli({"eval", "--checkpoint", (f.run / "final.shdw").string(), "--corpus", f.corpus.string(), "--out",
                   (f.dir / "e3").string(), "--tau", "0.5", "--baseline-threshold", "0.2"})
              .code == 0);
  const auto report = nlohmann::json::parse(oracle::read_bytes(f.dir / "e3" / "report.json"));
  CHECK(report.at("baseline").at("threshold").get<double>() == 0.2);
  CHECK(report.at("proposed").at("threshold").get<double>() == 0.5);
}

TEST_CASE("infer output matches re-binarization and is reproducible") {
  auto& f = fixture();
  const auto m = load_manifest(f.corpus);
  const auto image = m.resolve(m.with_role("eval")[0]->image_path);
  for (const char* name : {"i1", "i2"})
    REQUIRE(run_cli({"infer", "--checkpoint", (f.run / "final.shdw").string(), "--image", image.string(), "--out",
                     (f.dir / name).string(), "--tau", "0.6"})
                .code == 0);
  CHECK(oracle::read_bytes(f.dir / "i1" / "shadow.png") == oracle::read_bytes(f.dir / "i2" / "shadow.png"));
  CHECK(oracle::read_bytes(f.dir / "i1" / "overlay.png") == oracle::read_bytes(f.dir / "i2" / "overlay.png"));

  const auto shadow = imageio::read_gray(f.dir / "i1" / "shadow.png");
  CHECK(shadow.width == 32);
  CHECK(shadow.height == 32);

  const auto params = load_checkpoint(f.run / "final.shdw").params;
  const auto pred = binarize(infer_shadow(params, imageio::load(image)), 0.6);
  const auto overlay = imageio::read_rgb_png(f.dir / "i1" / "overlay.png");
  REQUIRE(overlay.width == 32);
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool red = overlay.pixels[3 * i] != overlay.pixels[3 * i + 1];
    REQUIRE(red == (pred.pixels[i] != 0));
  }
}

TEST_CASE("sweep of one point equals train then eval") {
  auto& f = fixture();
  write_json(f.dir / "grid.json", {{"loss/lambda_s", {10.0}}});
  REQUIRE(run_cli({"sweep", "--config", (f.dir / "train.json").string(), "--grid", (f.dir / "grid.json").string(),
                   "--corpus", f.corpus.string(), "--out", (f.dir / "sweep").string()})
              .code == 0);
  std::istringstream csv(oracle::read_bytes(f.dir / "sweep" / "sweep.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK_FALSE((std::getline(csv, row) && !row.empty()));

  REQUIRE(run_cli({"eval", "--checkpoint", (f.run / "final.shdw").string(), "--corpus", f.corpus.string(), "--out",
                   (f.dir / "e4").string(), "--select-tau"})
              .code == 0);
  const auto direct = nlohmann::json::parse(oracle::read_bytes(f.dir / "e4" / "report.json"));
  const auto swept = nlohmann::json::parse(oracle::read_bytes(f.dir / "sweep" / "run_000" / "eval" / "report.json"));
  CHECK(swept.at("proposed") == direct.at("proposed"));
}

TEST_CASE("sweep rows are ranked by IoU") {
  auto& f = fixture();
  write_json(f.dir / "grid2.json", {{"loss/lambda_s", {1.0, 10.0}}, {"epochs", {1}}});
  REQUIRE(run_cli({"sweep", "--config", (f.dir / "train.json").string(), "--grid", (f.dir / "grid2.json").string(),
                   "--corpus", f.corpus.string(), "--out", (f.dir / "sweep2").string()})
              .code == 0);
  std::istringstream csv(oracle::read_bytes(f.dir / "sweep2" / "sweep.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::vector<double> ious;
  const auto cols = [&] {
    std::vector<std::string> names;
    std::istringstream h(header);
    for (std::string c; std::getline(h, c, ',');) names.push_back(c);
    return names;
  }();
  const auto col = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "iou_mean") - cols.begin());
  REQUIRE(col < cols.size());
  while (std::getline(csv, row)) {
    std::vector<std::string> cells;
    std::istringstream r(row);
    for (std::string c; std::getline(r, c, ',');) cells.push_back(c);
    ious.push_back(std::stod(cells.at(col)));
  }
  REQUIRE(ious.size() == 2);
  CHECK(ious[0] >= ious[1]);
  write_json(f.dir / "grid_bad.json", {{"loss/lambda_q", {1.0}}});
  CHECK(run_cli({"sweep", "--config", (f.dir / "train.json").string(), "--grid", (f.dir / "grid_bad.json").string(),
                 "--corpus", f.corpus.string(), "--out", (f.dir / "sweep3").string()})
            .code == cli::kExitUsage);
}
