#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "m3dseg/cli/cli.hpp"
#include "m3dseg/common/binary_io.hpp"
#include "m3dseg/io/checkpoint.hpp"
#include "m3dseg/io/ply.hpp"

namespace fs = std::filesystem;
using m3dseg::cli::run;

namespace {

struct Captured {
  int code = 0;
  std::string out, err;
};

Captured invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Captured c;
  c.code = run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

std::map<std::string, m3dseg::io::Bytes> snapshot(const fs::path& dir) {
  std::map<std::string, m3dseg::io::Bytes> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = m3dseg::io::read_file(e.path());
  return files;
}

class Workspace {
 public:
  Workspace() : root_(fs::temp_directory_path() / "m3dseg_cli_test") {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }
  std::string operator/(const std::string& name) const { return (root_ / name).string(); }

 private:
  fs::path root_;
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

const char* kTinyConfig = R"({"meta_epochs": 2, "finetune_steps": 2, "batch": 2, "seed": 3, "learning_rate": 0.001,
  "architecture": {"conv_channels": [2, 3, 4], "predictor_dims": [6, 3], "f1_dims": [5, 3], "f2_hidden": [4],
                   "resolution": 8, "task_points": 16}})";

}  // namespace

TEST_CASE("gen-data counts, determinism and errors") {
  Workspace ws;
  auto r = invoke({"gen-data", "--out", ws / "d", "--categories", "table,mug", "--per-category", "8", "--seed", "1",
                   "--resolution", "16", "--points", "128"});
  REQUIRE(r.code == 0);
  const auto manifest = nlohmann::json::parse(m3dseg::io::read_text(ws / "d/manifest.json"));
  CHECK(manifest["records"].size() == 16);
  invoke({"gen-data", "--out", ws / "d2", "--categories", "table,mug", "--per-category", "8", "--seed", "1",
          "--resolution", "16", "--points", "128"});
  CHECK(snapshot(ws / "d") == snapshot(ws / "d2"));

  r = invoke({"gen-data", "--out", ws / "b", "--categories", "boat"});
  CHECK(r.code == 2);
  CHECK(r.err.find("boat") != std::string::npos);
  CHECK_FALSE(fs::exists(ws / "b"));
  CHECK(invoke({"gen-data", "--categories", "mug"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("train, fine-tune, segment, eval and export") {
  Workspace ws;
  REQUIRE(invoke({"gen-data", "--out", ws / "train", "--categories", "table,chair", "--per-category", "2", "--seed",
                  "1", "--resolution", "8", "--points", "64"}).code == 0);
  REQUIRE(invoke({"gen-data", "--out", ws / "mugs", "--categories", "mug", "--per-category", "2", "--seed", "2",
                  "--resolution", "8", "--points", "64", "--split", "test"}).code == 0);
  write(ws / "cfg.json", kTinyConfig);
  const auto train_before = snapshot(ws / "train");

  SUBCASE("validation happens before any output") {
    write(ws / "bad.json", R"({"learning_rate": -1})");
    const auto r = invoke({"meta-train", "--data", ws / "train", "--config", ws / "bad.json", "--out", ws / "m.ckpt"});
    CHECK(r.code == 2);
    CHECK(r.err.find("learning_rate") != std::string::npos);
    CHECK_FALSE(fs::exists(ws / "m.ckpt"));
    CHECK(invoke({"meta-train", "--data", ws / "mugs", "--config", ws / "cfg.json", "--out", ws / "m.ckpt"}).code == 2);
    CHECK_FALSE(fs::exists(ws / "m.ckpt"));
    CHECK(invoke({"meta-train", "--data", ws / "nowhere", "--config", ws / "cfg.json", "--out", ws / "m.ckpt"}).code ==
          4);
  }

  SUBCASE("full pipeline") {
    REQUIRE(invoke({"meta-train", "--data", ws / "train", "--config", ws / "cfg.json", "--out", ws / "meta.ckpt"}).code == 0);
    const std::string report = m3dseg::io::read_text(ws / "meta.ckpt.report.jsonl");
    CHECK(std::count(report.begin(), report.end(), '\n') == 2);
    CHECK(snapshot(ws / "train") == train_before);

    // same inputs, same bytes
    REQUIRE(invoke({"meta-train", "--data", ws / "train", "--config", ws / "cfg.json", "--out", ws / "meta2.ckpt"}).code == 0);
    CHECK(m3dseg::io::read_file(ws / "meta.ckpt") == m3dseg::io::read_file(ws / "meta2.ckpt"));

    REQUIRE(invoke({"fine-tune", "--meta", ws / "meta.ckpt", "--data", ws / "mugs", "--category", "mug", "--config",
                    ws / "cfg.json", "--out", ws / "learner.ckpt"}).code == 0);
    const auto ckpt = m3dseg::io::load_checkpoint(ws / "learner.ckpt");
    CHECK(ckpt.tensors.get("learner.theta_l").size() == ckpt.tensors.get("learner.theta_m.mug_001").size());

    write(ws / "paper.json", R"({"preset": "paper"})");
    auto r = invoke({"fine-tune", "--meta", ws / "meta.ckpt", "--data", ws / "mugs", "--category", "mug", "--config",
                     ws / "paper.json", "--out", ws / "x.ckpt"});
    CHECK(r.code == 2);
    CHECK(r.err.find("paper") != std::string::npos);
    CHECK(r.err.find("desk") != std::string::npos);

    REQUIRE(invoke({"segment", "--model", ws / "learner.ckpt", "--data", ws / "mugs", "--out", ws / "seg"}).code == 0);
    CHECK(fs::exists(ws / "seg/mug_000.labels"));
    REQUIRE(invoke({"eval", "--model", ws / "learner.ckpt", "--data", ws / "mugs", "--out", ws / "s.csv", "--json",
                    ws / "s.json", "--sweep", "16,32,64"}).code == 0);
    CHECK(m3dseg::io::read_text(ws / "s.csv").starts_with("category,n_shapes,mean_iou,accuracy\nmug,2,"));
    CHECK(fs::exists(ws / "s.csv.sweep.csv"));

    // ground truth fed back as predictions scores perfectly
    fs::create_directories(ws / "gt");
    const auto mugs = m3dseg::geometry::load_dataset(ws / "mugs");
    for (const auto& rec : mugs.records) {
      std::string text;
      for (auto l : rec.cloud.labels) text += std::to_string(l) + "\n";
      write(ws / ("gt/" + rec.id + ".labels"), text);
    }
    REQUIRE(invoke({"eval", "--predictions", ws / "gt", "--data", ws / "mugs", "--out", ws / "gt.csv"}).code == 0);
    CHECK(m3dseg::io::read_text(ws / "gt.csv") == "category,n_shapes,mean_iou,accuracy\nmug,2,1.000000,1.000000\n");

    REQUIRE(invoke({"export-ply", "--data", ws / "mugs", "--id", "mug_001", "--out", ws / "m.ply", "--model",
                    ws / "learner.ckpt"}).code == 0);
    const std::string ply = m3dseg::io::read_text(ws / "m.ply");
    CHECK(ply.starts_with("ply\nformat ascii 1.0\n"));
    CHECK(ply.find("element vertex 64\n") != std::string::npos);
    const auto parsed = m3dseg::io::parse_ply(ply);
    const auto& rec = mugs.records[1];
    REQUIRE(parsed.points.size() == rec.cloud.size());
    for (std::size_t i = 0; i < parsed.points.size(); ++i)
      for (int d = 0; d < 3; ++d) CHECK(std::abs(parsed.points[i][d] - rec.cloud.points[i][d]) <= 1e-6);
    CHECK(invoke({"export-ply", "--data", ws / "mugs", "--id", "cup_9", "--out", ws / "n.ply"}).code == 2);
  }

  SUBCASE("weight settings emit the ablation table") {
    const auto r = invoke({"fine-tune", "--data", ws / "mugs", "--category", "mug", "--config", ws / "cfg.json", "--out",
                           ws / "abl.ckpt", "--setting", "A,B,C", "--train-data", ws / "train", "--ablation-csv",
                           ws / "abl.csv"});
    REQUIRE(r.code == 0);
    const std::string csv = m3dseg::io::read_text(ws / "abl.csv");
    CHECK(csv.starts_with("setting,iou,acc\nA,"));
    CHECK(csv.find("\nB,") != std::string::npos);
    CHECK(csv.find("\nC,") != std::string::npos);
    CHECK(fs::exists(ws / "abl_C.ckpt"));
  }
}
