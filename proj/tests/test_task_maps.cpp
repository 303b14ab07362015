#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "otmask/errors.hpp"
#include "otmask/io.hpp"
#include "otmask/synth.hpp"
#include "otmask/task_maps.hpp"

using namespace otmask;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("otmask_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

SemanticMap float_semantic(std::mt19937_64& rng, int h, int w, int c) {
  SemanticMap map = oracle::random_semantic(rng, h, w, c);
  for (auto& v : map.values) v = static_cast<float>(v);
  return map;
}

}  // namespace

TEST_CASE("target kinds parse strictly") {
  CHECK(parse_target_kind("thing") == TargetKind::thing);
  CHECK(parse_target_kind("stuff") == TargetKind::stuff);
  CHECK(to_string(TargetKind::stuff) == "stuff");
  CHECK_THROWS_AS(parse_target_kind("Thing"), ValidationError);
}

TEST_CASE("semantic map validation names the first bad pixel") {
  SemanticMap map(2, 3, 2);
  for (PixelIndex p = 0; p < 6; ++p) map.at(p, 0) = 1.0;
  CHECK_NOTHROW(map.validate());
  map.at(4, 1) = 0.5;
  const std::string msg = error_of([&] { map.validate(); });
  CHECK(msg.find("pixel 4") != std::string::npos);
  CHECK(msg.find("x=1, y=1") != std::string::npos);
  map.at(4, 0) = std::nan("");
  CHECK_THROWS_AS(map.validate(), ValidationError);
}

TEST_CASE("point validation") {
  PointSet ok = {{1, 0, TargetKind::thing, 0, 0}, {2, 1, TargetKind::stuff, 2, 1}};
  CHECK_NOTHROW(validate_points(ok, 2, 3, 2));
  CHECK_THROWS_AS(validate_points({}, 2, 3), ValidationError);
  PointSet dup = {{3, 0, TargetKind::thing, 0, 0}, {3, 0, TargetKind::thing, 1, 0}};
  CHECK(error_of([&] { validate_points(dup, 2, 3); }).find("3") != std::string::npos);
  PointSet outside = {{1, 0, TargetKind::thing, 3, 0}};
  CHECK_THROWS_AS(validate_points(outside, 2, 3), ValidationError);
  PointSet bad_class = {{1, 2, TargetKind::thing, 0, 0}};
  CHECK_THROWS_AS(validate_points(bad_class, 2, 3, 2), ValidationError);
  PointSet zero_id = {{0, 0, TargetKind::thing, 0, 0}};
  CHECK_THROWS_AS(validate_points(zero_id, 2, 3), ValidationError);
}

TEST_CASE("pseudo-mask validation rejects id 0 and unknown ids") {
  PseudoMask mask;
  mask.height = 1;
  mask.width = 2;
  mask.target = {1, 2};
  mask.lookup = {{1, {0, TargetKind::stuff}}, {2, {1, TargetKind::thing}}};
  CHECK_NOTHROW(mask.validate());
  mask.target[1] = 0;
  CHECK_THROWS_AS(mask.validate(), ValidationError);
  mask.target[1] = 7;
  CHECK_THROWS_AS(mask.validate(), ValidationError);
}

TEST_CASE("low-level boundary proxy") {
  SUBCASE("constant image is all zero") {
    const auto b = low_level_boundary(RgbImage(5, 6, 0.3));
    for (double v : b.values) CHECK(v == 0.0);
  }
  SUBCASE("vertical step lights the two adjacent columns") {
    RgbImage image(4, 8);
    for (int y = 0; y < 4; ++y) {
      for (int x = 4; x < 8; ++x) {
        for (int c = 0; c < 3; ++c) image.at(static_cast<PixelIndex>(y) * 8 + x, c) = 1.0;
      }
    }
    const auto b = low_level_boundary(image);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 8; ++x) {
        const double v = b.values[static_cast<PixelIndex>(y) * 8 + x];
        CHECK(v == doctest::Approx(x == 3 || x == 4 ? 1.0 : 0.0));
      }
    }
  }
  SUBCASE("invariant to a constant offset") {
    std::mt19937_64 rng(2);
    RgbImage image = oracle::random_image(rng, 6, 7, 0.0, 0.5);
    RgbImage shifted = image;
    for (auto& v : shifted.values) v += 0.25;
    const auto a = low_level_boundary(image);
    const auto b = low_level_boundary(shifted);
    for (std::size_t p = 0; p < a.values.size(); ++p) {
      CHECK(a.values[p] == doctest::Approx(b.values[p]).epsilon(1e-9));
    }
  }
}

TEST_CASE("semantic map codec") {
  TempDir dir("maps");
  std::mt19937_64 rng(9);
  SUBCASE("roundtrip is bit-identical for float data") {
    for (int trial = 0; trial < 20; ++trial) {
      const int h = oracle::uniform_int(rng, 1, 9);
      const int w = oracle::uniform_int(rng, 1, 9);
      const int c = oracle::uniform_int(rng, 1, 5);
      SemanticMap map = c == 1 ? SemanticMap(h, w, 1) : float_semantic(rng, h, w, c);
      if (c == 1) std::fill(map.values.begin(), map.values.end(), 1.0);
      write_semantic_map(map, dir / "s.pfm");
      CHECK(read_semantic_map(dir / "s.pfm") == map);
      const auto any = read_map(dir / "s.pfm");
      if (c > 1) {
        REQUIRE(std::holds_alternative<SemanticMap>(any));
        CHECK(std::get<SemanticMap>(any) == map);
      }
    }
  }
  SUBCASE("layout is stacked planes with a channels sidecar") {
    SemanticMap map(1, 2, 2);
    map.values = {1.0, 0.0, 0.25, 0.75};
    write_semantic_map(map, dir / "p.pfm");
    std::ifstream side(channels_sidecar(dir / "p.pfm"));
    std::string line;
    std::getline(side, line);
    CHECK(line == "channels=2");
    std::ifstream in(dir / "p.pfm", std::ios::binary);
    std::string magic, dims, scale;
    std::getline(in, magic);
    std::getline(in, dims);
    std::getline(in, scale);
    CHECK(magic == "Pf");
    CHECK(dims == "2 2");
    CHECK(std::stod(scale) < 0.0);
    float plane[4];
    in.read(reinterpret_cast<char*>(plane), sizeof plane);
    // Channel 0 plane first: pixel values 1.0, 0.25.
    CHECK(plane[0] == 1.0f);
    CHECK(plane[1] == 0.25f);
    CHECK(plane[2] == 0.0f);
    CHECK(plane[3] == 0.75f);
  }
  SUBCASE("probabilities summing to 1.5 are rejected at pixel 0") {
    SemanticMap map(2, 2, 2);
    for (PixelIndex p = 0; p < 4; ++p) map.at(p, 0) = 1.0;
    map.at(0, 1) = 0.5;
    write_semantic_map(map, dir / "bad.pfm");
    const std::string msg = error_of([&] { read_semantic_map(dir / "bad.pfm"); });
    CHECK(msg.find("1.5") != std::string::npos);
    CHECK(msg.find("pixel 0") != std::string::npos);
  }
  SUBCASE("truncated payload is rejected") {
    SemanticMap map = float_semantic(rng, 4, 4, 3);
    write_semantic_map(map, dir / "t.pfm");
    const auto size = fs::file_size(dir / "t.pfm");
    fs::resize_file(dir / "t.pfm", size - 5);
    CHECK_THROWS_AS(read_semantic_map(dir / "t.pfm"), ValidationError);
  }
  SUBCASE("malformed headers") {
    write_text(dir / "m.pfm", "PF\n2 2\n-1.0\n");
    CHECK_THROWS_AS(read_semantic_map(dir / "m.pfm"), ValidationError);
    write_text(dir / "n.pfm", "Pf\n2 x\n-1.0\n");
    CHECK_THROWS_AS(read_boundary_map(dir / "n.pfm"), ValidationError);
    CHECK_THROWS_AS(read_boundary_map(dir / "missing.pfm"), ValidationError);
  }
  SUBCASE("sidecar height mismatch") {
    BoundaryMap b(3, 2, 0.5);
    write_boundary_map(b, dir / "b.pfm");
    write_text(channels_sidecar(dir / "b.pfm"), "channels=2\n");
    CHECK_THROWS_AS(read_semantic_map(dir / "b.pfm"), ValidationError);
  }
}

TEST_CASE("boundary map codec") {
  TempDir dir("bmap");
  std::mt19937_64 rng(4);
  BoundaryMap b(5, 3);
  for (auto& v : b.values) v = static_cast<float>(oracle::uniform(rng));
  write_boundary_map(b, dir / "b.pfm");
  CHECK(read_boundary_map(dir / "b.pfm") == b);
  REQUIRE(std::holds_alternative<BoundaryMap>(read_map(dir / "b.pfm")));
  b.values[2] = 1.5;
  write_boundary_map(b, dir / "bad.pfm");
  CHECK(error_of([&] { read_boundary_map(dir / "bad.pfm"); }).find("pixel 2") != std::string::npos);
}

TEST_CASE("points file") {
  TempDir dir("points");
  SUBCASE("two entries with comments") {
    write_text(dir / "p.txt", "# id class kind x y\n1 0 stuff 0 0\n\n2 1 thing 3 2  # corner\n");
    const auto pts = read_points(dir / "p.txt", 3, 4);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0] == PointAnnotation{1, 0, TargetKind::stuff, 0, 0});
    CHECK(pts[1] == PointAnnotation{2, 1, TargetKind::thing, 3, 2});
    write_points(pts, dir / "q.txt");
    CHECK(read_points(dir / "q.txt", 3, 4) == pts);
  }
  SUBCASE("duplicate id names the id") {
    write_text(dir / "d.txt", "3 0 thing 0 0\n3 0 thing 1 1\n");
    const std::string msg = error_of([&] { read_points(dir / "d.txt", 3, 4); });
    CHECK(msg.find("duplicate target id 3") != std::string::npos);
  }
  SUBCASE("out of range coordinate") {
    write_text(dir / "o.txt", "1 0 thing 4 0\n");
    CHECK_THROWS_AS(read_points(dir / "o.txt", 3, 4), ValidationError);
  }
  SUBCASE("unknown kind token") {
    write_text(dir / "k.txt", "1 0 blob 0 0\n");
    CHECK_THROWS_AS(read_points(dir / "k.txt", 3, 4), ValidationError);
  }
  SUBCASE("short line") {
    write_text(dir / "s.txt", "1 0 thing 0\n");
    CHECK_THROWS_AS(read_points(dir / "s.txt", 3, 4), ValidationError);
  }
}

TEST_CASE("mask codec") {
  TempDir dir("mask");
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    PseudoMask mask;
    mask.height = oracle::uniform_int(rng, 1, 12);
    mask.width = oracle::uniform_int(rng, 1, 12);
    const int ids = oracle::uniform_int(rng, 1, 5);
    for (int id = 1; id <= ids; ++id) {
      mask.lookup[id * 300] = {id % 3, id % 2 ? TargetKind::thing : TargetKind::stuff};
    }
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
      mask.target.push_back(300 * oracle::uniform_int(rng, 1, ids));
    }
    write_mask(mask, dir / "m.pgm");
    CHECK(read_mask(dir / "m.pgm") == mask);
  }
  SUBCASE("samples are big-endian 16-bit") {
    PseudoMask mask{1, 1, {258}, {{258, {0, TargetKind::thing}}}};
    write_mask(mask, dir / "one.pgm");
    std::ifstream in(dir / "one.pgm", std::ios::binary);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    CHECK(text.substr(0, 2) == "P5");
    CHECK(static_cast<unsigned char>(text[text.size() - 2]) == 1);
    CHECK(static_cast<unsigned char>(text[text.size() - 1]) == 2);
  }
  SUBCASE("unknown id in the image") {
    PseudoMask mask{1, 2, {1, 2}, {{1, {0, TargetKind::thing}}, {2, {0, TargetKind::thing}}}};
    write_mask(mask, dir / "u.pgm");
    write_text(labels_sidecar(dir / "u.pgm"), "1 0 thing\n");
    CHECK_THROWS_AS(read_mask(dir / "u.pgm"), ValidationError);
  }
}

TEST_CASE("image codec quantizes to 8 bits") {
  TempDir dir("img");
  std::mt19937_64 rng(1);
  RgbImage image(3, 4);
  for (auto& v : image.values) v = oracle::uniform_int(rng, 0, 255) / 255.0;
  write_image(image, dir / "i.ppm");
  CHECK(read_image(dir / "i.ppm") == image);
}

TEST_CASE("synthetic scenes") {
  SUBCASE("single full-canvas stuff target is exactly one-hot") {
    SceneSpec spec;
    spec.height = 8;
    spec.width = 10;
    spec.shapes = {{ShapeType::rect, TargetKind::stuff, 1, 0, 0, 10, 8, {}}};
    const Scene s = synth_scene(spec, 3);
    for (PixelIndex p = 0; p < 80; ++p) {
      CHECK(s.semantic.at(p, 0) == 0.0);
      CHECK(s.semantic.at(p, 1) == 1.0);
      CHECK(s.ground_truth.target[p] == 1);
    }
    CHECK(s.points.size() == 1);
  }
  SUBCASE("two same-class squares give two things and one stuff") {
    const SceneSpec spec = parse_scene_spec(
        "height 16\nwidth 20\nbackground 0\nrect thing 1 2 2 5 5\nrect thing 1 12 8 5 5\n");
    const Scene s = synth_scene(spec, 1);
    std::set<int> ids(s.ground_truth.target.begin(), s.ground_truth.target.end());
    CHECK(ids.size() == 3);
    int things = 0;
    for (const auto& [id, info] : s.ground_truth.lookup) things += info.kind == TargetKind::thing;
    CHECK(things == 2);
  }
  SUBCASE("same seed gives identical scenes, other seeds differ") {
    SceneSpec spec = parse_scene_spec(
        "classes 3\nsemantic_noise 0.1\nimage_noise 0.05\ninstance_color 0.1\nbackground 0\n"
        "ellipse thing 1 3 3 12 9\nrect thing 2 16 14 10 10\n");
    const Scene a = synth_scene(spec, 42);
    const Scene b = synth_scene(spec, 42);
    const Scene c = synth_scene(spec, 43);
    CHECK(a.semantic == b.semantic);
    CHECK(a.image == b.image);
    CHECK(a.points == b.points);
    CHECK(a.boundary_low == b.boundary_low);
    CHECK_FALSE(a.semantic == c.semantic);
  }
  SUBCASE("noise-free argmax equals ground-truth class") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      SceneSpec spec;
      spec.classes = 4;
      spec.blur = oracle::uniform(rng, 0.0, 0.49);
      spec.shapes.push_back({ShapeType::rect, TargetKind::stuff, 0, 0, 0, 32, 32, {}});
      for (int k = 0; k < 4; ++k) {
        const int w = oracle::uniform_int(rng, 2, 12);
        const int h = oracle::uniform_int(rng, 2, 12);
        spec.shapes.push_back({k % 2 ? ShapeType::rect : ShapeType::ellipse, TargetKind::thing,
                               oracle::uniform_int(rng, 1, 3), oracle::uniform_int(rng, 0, 32 - w),
                               oracle::uniform_int(rng, 0, 32 - h), w, h, {}});
      }
      Scene s;
      try {
        s = synth_scene(spec, trial);
      } catch (const ValidationError&) {
        continue;  // a shape was painted over completely
      }
      for (PixelIndex p = 0; p < s.semantic.pixel_count(); ++p) {
        const auto probs = s.semantic.probabilities(p);
        const int arg = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        CHECK(arg == s.ground_truth.lookup.at(s.ground_truth.target[p]).class_id);
      }
      CHECK_NOTHROW(s.semantic.validate());
    }
  }
  SUBCASE("high-level boundary marks exactly the target outlines") {
    const SceneSpec spec = parse_scene_spec(
        "height 20\nwidth 24\nclasses 3\nbackground 0\nrect thing 1 3 3 6 6\nellipse thing 2 12 6 9 9\n");
    const Scene s = synth_scene(spec, 5);
    const auto outline = outline_pixels(s.ground_truth);
    const std::set<PixelIndex> on(outline.begin(), outline.end());
    for (PixelIndex p = 0; p < s.boundary_high.pixel_count(); ++p) {
      CHECK((s.boundary_high.values[p] > 0.0) == (on.count(p) > 0));
    }
  }
  SUBCASE("gradient proxy responds exactly on two-blob outlines") {
    const SceneSpec spec = parse_scene_spec(
        "height 20\nwidth 24\nclasses 3\nbackground 0\nrect thing 1 3 3 6 6\nrect thing 2 12 6 9 9\n");
    const Scene s = synth_scene(spec, 5);
    const auto outline = outline_pixels(s.ground_truth);
    const std::set<PixelIndex> on(outline.begin(), outline.end());
    for (PixelIndex p = 0; p < s.boundary_low.pixel_count(); ++p) {
      CHECK((s.boundary_low.values[p] > 0.0) == (on.count(p) > 0));
    }
  }
  SUBCASE("points land on their own target") {
    const SceneSpec spec = parse_scene_spec(
        "background 0\nrect thing 1 4 4 10 10\nrect thing 1 8 8 10 10 point=17,17\n");
    const Scene s = synth_scene(spec, 12);
    for (const auto& pt : s.points) CHECK(s.ground_truth.target[pt.pixel(32)] == pt.target_id);
    CHECK(s.points[2].x == 17);
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(synth_scene(parse_scene_spec("background 0\nrect thing 1 30 30 5 5\n"), 1),
                    ValidationError);
    CHECK_THROWS_AS(synth_scene(parse_scene_spec("background 0\nrect thing 5 3 3 5 5\n"), 1),
                    ValidationError);
    CHECK_THROWS_AS(synth_scene(parse_scene_spec("rect thing 1 3 3 5 5\n"), 1), ValidationError);
    CHECK_THROWS_AS(
        synth_scene(parse_scene_spec("background 0\nrect thing 1 3 3 5 5 point=0,0\n"), 1),
        ValidationError);
    CHECK_THROWS_AS(
        synth_scene(parse_scene_spec("background 0\nrect thing 1 3 3 5 5\nrect thing 1 2 2 8 8\n"), 1),
        ValidationError);
    CHECK_THROWS_AS(parse_scene_spec("circle thing 1 3 3 5 5\n"), ValidationError);
    CHECK_THROWS_AS(parse_scene_spec("height x\n"), ValidationError);
  }
  SUBCASE("scene files roundtrip") {
    TempDir dir("scene");
    const SceneSpec spec = parse_scene_spec(
        "semantic_noise 0.2\nimage_noise 0.1\nbackground 0\nellipse thing 1 5 5 14 10\n");
    const Scene s = synth_scene(spec, 77);
    write_scene(s, dir.path);
    const Scene r = read_scene(dir.path);
    CHECK(r.semantic == s.semantic);
    CHECK(r.boundary_high == s.boundary_high);
    CHECK(r.boundary_low == s.boundary_low);
    CHECK(r.image == s.image);
    CHECK(r.points == s.points);
    CHECK(r.ground_truth == s.ground_truth);
  }
}
