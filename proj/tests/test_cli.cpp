#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "otmask/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = OTMASK_CLI_PATH;

int sh(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& path) { return json::parse(slurp(path)); }

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::current_path() / "cli_workspace";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = root / name;
    std::ofstream(p) << text;
    return p;
  }
  std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }
};

const char* kTwoSquares =
    "height 24\nwidth 24\nclasses 3\nsemantic_noise 0.05\nimage_noise 0.02\n"
    "background 0\nrect thing 1 3 4 7 7\nrect thing 2 13 12 8 8\n";

const char* kTouching =
    "height 20\nwidth 30\nclasses 2\nsemantic_noise 0.05\ninstance_edge 0.5\n"
    "background 0\nrect thing 1 4 4 10 12 point=4,4\nrect thing 1 14 4 10 12 point=23,15\n";

}  // namespace

TEST_CASE("synth is deterministic") {
  Workspace ws;
  const auto spec = ws.write("two_squares.txt", kTwoSquares);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 7 --out " + ws.q(ws.root / "a")) == 0);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 7 --out " + ws.q(ws.root / "b")) == 0);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 8 --out " + ws.q(ws.root / "c")) == 0);
  for (const char* f : {"image.ppm", "semantic.pfm", "semantic.pfm.channels", "boundary_high.pfm",
                        "boundary_low.pfm", "points.txt", "gt_mask.pgm", "gt_mask.pgm.labels",
                        "scene.json"}) {
    INFO(f);
    REQUIRE(fs::exists(ws.root / "a" / f));
    CHECK(slurp(ws.root / "a" / f) == slurp(ws.root / "b" / f));
  }
  CHECK(slurp(ws.root / "a" / "semantic.pfm") != slurp(ws.root / "c" / "semantic.pfm"));
  CHECK(read_json(ws.root / "a" / "scene.json")["manifest"]["seed"] == 7);
}

TEST_CASE("generate on a single-point scene labels every pixel with that target") {
  Workspace ws;
  const auto spec = ws.write("single.txt", "height 10\nwidth 12\nclasses 2\nbackground 1\n");
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 1 --out " + ws.q(ws.root / "single")) == 0);
  REQUIRE(sh("generate " + ws.q(ws.root / "single") + " --out " + ws.q(ws.root / "out")) == 0);
  const auto mask = otmask::read_mask(ws.root / "out" / "single" / "mask.pgm");
  CHECK(mask.target == std::vector<int>(120, 1));
  const json diag = read_json(ws.root / "out" / "single" / "diagnostics.json");
  CHECK(diag["results"]["mean_iou"] == 1.0);
  CHECK(diag["results"]["diagnostics"]["targets"][0]["pixels"] == 120);
  CHECK(diag["manifest"]["command"] == "generate");
  CHECK_FALSE(diag["manifest"].contains("timings"));
}

TEST_CASE("generate with explicit map flags") {
  Workspace ws;
  const auto spec = ws.write("two_squares.txt", kTwoSquares);
  const fs::path scene = ws.root / "s";
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 3 --out " + ws.q(scene)) == 0);
  const std::string flags = " --semantic " + ws.q(scene / "semantic.pfm") + " --boundary-high " +
                            ws.q(scene / "boundary_high.pfm") + " --boundary-low " +
                            ws.q(scene / "boundary_low.pfm") + " --points " +
                            ws.q(scene / "points.txt");
  CHECK(sh("generate" + flags + " --out " + ws.q(ws.root / "o1")) == 0);
  CHECK(sh("generate " + ws.q(scene) + " --out " + ws.q(ws.root / "o2")) == 0);
  const auto a = otmask::read_mask(ws.root / "o1" / "mask.pgm");
  const auto b = otmask::read_mask(ws.root / "o2" / "s" / "mask.pgm");
  CHECK(a == b);
  CHECK(sh("generate --semantic " + ws.q(scene / "semantic.pfm") + " --out " +
           ws.q(ws.root / "o3")) == 1);
}

TEST_CASE("usage errors exit with status 1") {
  Workspace ws;
  CHECK(sh("") == 1);
  CHECK(sh("frobnicate") == 1);
  CHECK(sh("generate --bogus 1 --out x") == 1);
  CHECK(sh("generate --beta -1 " + ws.q(ws.root) + " --out " + ws.q(ws.root / "o")) == 1);
  CHECK(sh("evaluate --pred " + ws.q(ws.root / "missing.pgm") + " --gt " +
           ws.q(ws.root / "missing.pgm")) == 1);
  const auto bad = ws.write("bad.txt", "height 4\nwidth 4\nrect thing 0 0 0 2 2\n");
  CHECK(sh("synth --spec " + ws.q(bad) + " --out " + ws.q(ws.root / "bad")) == 1);
  CHECK(sh("--version") == 0);
}

TEST_CASE("compare writes per-scene reports and a summary") {
  Workspace ws;
  const auto spec = ws.write("touching.txt", kTouching);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 2 --out " + ws.q(ws.root / "t1")) == 0);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 3 --out " + ws.q(ws.root / "t2")) == 0);
  REQUIRE(sh("compare " + ws.q(ws.root / "t1") + " " + ws.q(ws.root / "t2") + " --jobs 2 --out " +
             ws.q(ws.root / "cmp")) == 0);
  for (const char* s : {"t1", "t2"}) {
    CHECK(fs::exists(ws.root / "cmp" / s / "ot_mask.pgm"));
    CHECK(fs::exists(ws.root / "cmp" / s / "mc_mask.pgm"));
    const json report = read_json(ws.root / "cmp" / s / "compare.json");
    CHECK(report["results"]["delta"].contains("mean_iou"));
  }
  const json summary = read_json(ws.root / "cmp" / "summary.json")["results"];
  CHECK(summary["scored_scenes"] == 2);
  CHECK(summary["ot_mean_iou"].get<double>() >= summary["mc_mean_iou"].get<double>());
}

TEST_CASE("evaluate reports panoptic quality") {
  Workspace ws;
  const auto spec = ws.write("two_squares.txt", kTwoSquares);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 4 --out " + ws.q(ws.root / "s")) == 0);
  const auto gt = ws.root / "s" / "gt_mask.pgm";
  REQUIRE(sh("evaluate --pred " + ws.q(gt) + " --gt " + ws.q(gt) + " --out " +
             ws.q(ws.root / "eval.json")) == 0);
  const json r = read_json(ws.root / "eval.json")["results"];
  CHECK(r["pq"] == 1.0);
  CHECK(r["sq"] == 1.0);
  CHECK(r["rq"] == 1.0);
  CHECK(r["per_class"].contains("1"));
}

TEST_CASE("losses reports values and gradient checks") {
  Workspace ws;
  const auto spec = ws.write("two_squares.txt", kTwoSquares);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 5 --out " + ws.q(ws.root / "s")) == 0);
  REQUIRE(sh("losses " + ws.q(ws.root / "s") + " --fd-samples 32 --out " +
             ws.q(ws.root / "losses.json")) == 0);
  const json r = read_json(ws.root / "losses.json")["results"];
  for (const char* term : {"partial_cross_entropy", "lab_affinity", "rgb_tree", "boundary_affinity"}) {
    INFO(term);
    CHECK(r[term]["value"].get<double>() >= 0.0);
    CHECK(r[term]["fd_coordinates"] == 32);
  }
  CHECK(r["partial_cross_entropy"]["fd_max_relative_error"].get<double>() < 1e-6);
  CHECK(r.contains("semantic_total"));
}

TEST_CASE("config file values sit below explicit flags") {
  Workspace ws;
  const auto spec = ws.write("two_squares.txt", kTwoSquares);
  REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed 6 --out " + ws.q(ws.root / "s")) == 0);
  const auto cfg = ws.write("run.cfg", "# pipeline overrides\nbeta = 0.3\nscheme = nearest_gt\n");
  REQUIRE(sh("generate " + ws.q(ws.root / "s") + " --config " + ws.q(cfg) + " --out " +
             ws.q(ws.root / "a")) == 0);
  json m = read_json(ws.root / "a" / "s" / "diagnostics.json")["manifest"]["config"];
  CHECK(m["beta"] == 0.3);
  CHECK(m["supply_scheme"] == "nearest_gt");
  REQUIRE(sh("generate " + ws.q(ws.root / "s") + " --config " + ws.q(cfg) + " --beta 0.5 --out " +
             ws.q(ws.root / "b")) == 0);
  m = read_json(ws.root / "b" / "s" / "diagnostics.json")["manifest"]["config"];
  CHECK(m["beta"] == 0.5);
  const auto bad = ws.write("bad.cfg", "gamma = 2\n");
  CHECK(sh("generate " + ws.q(ws.root / "s") + " --config " + ws.q(bad) + " --out " +
           ws.q(ws.root / "c")) == 1);
}

TEST_CASE("job count does not change outputs") {
  Workspace ws;
  const auto spec = ws.write("touching.txt", kTouching);
  std::string scenes;
  for (int k = 0; k < 4; ++k) {
    const fs::path dir = ws.root / ("scene" + std::to_string(k));
    REQUIRE(sh("synth --spec " + ws.q(spec) + " --seed " + std::to_string(k) + " --out " +
               ws.q(dir)) == 0);
    scenes += " " + ws.q(dir);
  }
  REQUIRE(sh("generate" + scenes + " --jobs 1 --out " + ws.q(ws.root / "j1")) == 0);
  REQUIRE(sh("generate" + scenes + " --out " + ws.q(ws.root / "j4"), "OTMASK_JOBS=4") == 0);
  for (int k = 0; k < 4; ++k) {
    const std::string name = "scene" + std::to_string(k);
    CHECK(slurp(ws.root / "j1" / name / "mask.pgm") == slurp(ws.root / "j4" / name / "mask.pgm"));
    CHECK(slurp(ws.root / "j1" / name / "diagnostics.json") ==
          slurp(ws.root / "j4" / name / "diagnostics.json"));
  }
  CHECK(sh("generate" + scenes + " --jobs 0 --out " + ws.q(ws.root / "j0")) == 1);
}
