#include "otmask/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "otmask/errors.hpp"
#include "otmask/io.hpp"

namespace otmask {

namespace fs = std::filesystem;

namespace {

// Distinct luminances so class changes always show up in the gradient proxy.
constexpr std::array<std::array<double, 3>, 10> kPalette = {{
    {0.20, 0.55, 0.20},
    {0.85, 0.25, 0.20},
    {0.20, 0.35, 0.85},
    {0.90, 0.80, 0.25},
    {0.55, 0.25, 0.65},
    {0.30, 0.75, 0.80},
    {0.95, 0.55, 0.10},
    {0.45, 0.45, 0.45},
    {0.10, 0.10, 0.30},
    {0.80, 0.90, 0.70},
}};

std::array<double, 3> class_color(int class_id) {
  if (class_id < static_cast<int>(kPalette.size())) return kPalette[class_id];
  // Beyond the palette: a deterministic hash spread over the cube.
  const auto h = static_cast<std::uint32_t>(class_id) * 2654435761u;
  return {((h >> 0) & 0xff) / 255.0, ((h >> 8) & 0xff) / 255.0, ((h >> 16) & 0xff) / 255.0};
}

// Portable draws from mt19937_64 (the std distributions are implementation-defined).
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

bool covers(const ShapeSpec& s, int px, int py) {
  if (px < s.x || py < s.y || px >= s.x + s.width || py >= s.y + s.height) return false;
  if (s.type == ShapeType::rect) return true;
  const double cx = s.x + 0.5 * s.width;
  const double cy = s.y + 0.5 * s.height;
  const double dx = (px + 0.5 - cx) / (0.5 * s.width);
  const double dy = (py + 0.5 - cy) / (0.5 * s.height);
  return dx * dx + dy * dy <= 1.0;
}

void check_spec(const SceneSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) throw ValidationError("scene canvas must be non-empty");
  if (spec.classes < 1) throw ValidationError("scene needs at least one class");
  if (!(spec.blur >= 0.0 && spec.blur < 0.5)) throw ValidationError("blur must lie in [0, 0.5)");
  if (!(spec.semantic_noise >= 0.0) || !(spec.image_noise >= 0.0) || !(spec.instance_color >= 0.0)) {
    throw ValidationError("noise amplitudes must be >= 0");
  }
  if (!(spec.class_edge >= 0.0 && spec.class_edge <= 1.0) ||
      !(spec.instance_edge >= 0.0 && spec.instance_edge <= 1.0)) {
    throw ValidationError("edge strengths must lie in [0, 1]");
  }
  if (spec.shapes.empty()) throw ValidationError("scene has no shapes");
  for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
    const ShapeSpec& s = spec.shapes[k];
    const std::string name = "shape " + std::to_string(k + 1);
    if (s.width < 1 || s.height < 1 || s.x < 0 || s.y < 0 || s.x + s.width > spec.width ||
        s.y + s.height > spec.height) {
      throw ValidationError(name + " lies outside the " + std::to_string(spec.width) + "x" +
                            std::to_string(spec.height) + " canvas");
    }
    if (s.class_id < 0 || s.class_id >= spec.classes) {
      throw ValidationError(name + " has class " + std::to_string(s.class_id) + " outside [0, " +
                            std::to_string(spec.classes) + ")");
    }
  }
}

double parse_real(const std::string& token, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ValidationError("scene spec line " + std::to_string(line_no) + ": bad number '" + token + "'");
}

int parse_int(const std::string& token, int line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used == token.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ValidationError("scene spec line " + std::to_string(line_no) + ": bad integer '" + token +
                        "'");
}

}  // namespace

Scene synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  const int h = spec.height;
  const int w = spec.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::mt19937_64 rng(seed);

  Scene scene;
  PseudoMask& gt = scene.ground_truth;
  gt.height = h;
  gt.width = w;
  gt.target.assign(n, 0);
  for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
    const ShapeSpec& s = spec.shapes[k];
    const int id = static_cast<int>(k) + 1;
    gt.lookup[id] = {s.class_id, s.kind};
    for (int y = s.y; y < s.y + s.height; ++y) {
      for (int x = s.x; x < s.x + s.width; ++x) {
        if (covers(s, x, y)) gt.target[static_cast<std::size_t>(y) * w + x] = id;
      }
    }
  }
  if (std::find(gt.target.begin(), gt.target.end(), 0) != gt.target.end()) {
    throw ValidationError("scene shapes do not cover the whole canvas (add a background)");
  }

  std::vector<std::vector<PixelIndex>> pixels_of(spec.shapes.size());
  for (PixelIndex p = 0; p < n; ++p) pixels_of[gt.target[p] - 1].push_back(p);

  std::vector<std::array<double, 3>> target_color(spec.shapes.size());
  for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
    target_color[k] = class_color(spec.shapes[k].class_id);
    for (auto& c : target_color[k]) c += spec.instance_color * (2.0 * uniform01(rng) - 1.0);
  }

  for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
    const ShapeSpec& s = spec.shapes[k];
    const int id = static_cast<int>(k) + 1;
    if (pixels_of[k].empty()) {
      throw ValidationError("shape " + std::to_string(id) + " is fully covered by later shapes");
    }
    PointAnnotation point{id, s.class_id, s.kind, 0, 0};
    if (s.point) {
      point.x = s.point->first;
      point.y = s.point->second;
      if (point.x < 0 || point.y < 0 || point.x >= w || point.y >= h ||
          gt.target[point.pixel(w)] != id) {
        throw ValidationError("explicit point of shape " + std::to_string(id) +
                              " is not on its visible target");
      }
    } else {
      const PixelIndex p = pixels_of[k][uniform_index(rng, pixels_of[k].size())];
      point.x = static_cast<int>(p % w);
      point.y = static_cast<int>(p / w);
    }
    scene.points.push_back(point);
  }

  scene.image = RgbImage(h, w);
  for (PixelIndex p = 0; p < n; ++p) {
    const auto& color = target_color[gt.target[p] - 1];
    for (int c = 0; c < 3; ++c) {
      double v = color[c];
      if (spec.image_noise > 0.0) v += spec.image_noise * (2.0 * uniform01(rng) - 1.0);
      scene.image.at(p, c) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
  }
  scene.boundary_low = low_level_boundary(scene.image);
  for (auto& v : scene.boundary_low.values) v = to_float_precision(v);

  const int nc = spec.classes;
  auto class_at = [&](int y, int x) {
    return gt.lookup.at(gt.target[static_cast<std::size_t>(y) * w + x]).class_id;
  };
  scene.semantic = SemanticMap(h, w, nc);
  std::vector<double> probs(nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(probs.begin(), probs.end(), 0.0);
      int window = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          probs[class_at(yy, xx)] += 1.0;
          ++window;
        }
      }
      for (auto& v : probs) v *= spec.blur / window;
      probs[class_at(y, x)] += 1.0 - spec.blur;
      double sum = 0.0;
      for (auto& v : probs) {
        if (spec.semantic_noise > 0.0) v += spec.semantic_noise * uniform01(rng);
        sum += v;
      }
      const PixelIndex p = static_cast<PixelIndex>(y) * w + x;
      for (int c = 0; c < nc; ++c) scene.semantic.at(p, c) = to_float_precision(probs[c] / sum);
    }
  }

  scene.boundary_high = BoundaryMap(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const PixelIndex p = static_cast<PixelIndex>(y) * w + x;
      double strength = 0.0;
      for (int d = 0; d < 4; ++d) {
        static constexpr int kDy[] = {-1, 1, 0, 0};
        static constexpr int kDx[] = {0, 0, -1, 1};
        const int yy = y + kDy[d];
        const int xx = x + kDx[d];
        if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
        const PixelIndex q = static_cast<PixelIndex>(yy) * w + xx;
        if (gt.target[q] == gt.target[p]) continue;
        strength = std::max(strength, class_at(yy, xx) == class_at(y, x) ? spec.instance_edge
                                                                         : spec.class_edge);
      }
      scene.boundary_high.values[p] = strength;
    }
  }
  return scene;
}

std::vector<PixelIndex> outline_pixels(const PseudoMask& mask) {
  std::vector<PixelIndex> out;
  const int h = mask.height;
  const int w = mask.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const PixelIndex p = static_cast<PixelIndex>(y) * w + x;
      const bool edge = (x > 0 && mask.target[p - 1] != mask.target[p]) ||
                        (x + 1 < w && mask.target[p + 1] != mask.target[p]) ||
                        (y > 0 && mask.target[p - w] != mask.target[p]) ||
                        (y + 1 < h && mask.target[p + w] != mask.target[p]);
      if (edge) out.push_back(p);
    }
  }
  return out;
}

SceneSpec parse_scene_spec(std::string_view text) {
  SceneSpec spec;
  spec.shapes.clear();
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::vector<std::string> tok{std::istream_iterator<std::string>(line),
                                 std::istream_iterator<std::string>()};
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    auto need = [&](std::size_t count) {
      if (tok.size() != count) {
        throw ValidationError("scene spec line " + std::to_string(line_no) + ": '" + key +
                              "' expects " + std::to_string(count - 1) + " argument(s)");
      }
    };
    if (key == "height") {
      need(2);
      spec.height = parse_int(tok[1], line_no);
    } else if (key == "width") {
      need(2);
      spec.width = parse_int(tok[1], line_no);
    } else if (key == "classes") {
      need(2);
      spec.classes = parse_int(tok[1], line_no);
    } else if (key == "blur") {
      need(2);
      spec.blur = parse_real(tok[1], line_no);
    } else if (key == "semantic_noise") {
      need(2);
      spec.semantic_noise = parse_real(tok[1], line_no);
    } else if (key == "image_noise") {
      need(2);
      spec.image_noise = parse_real(tok[1], line_no);
    } else if (key == "class_edge") {
      need(2);
      spec.class_edge = parse_real(tok[1], line_no);
    } else if (key == "instance_edge") {
      need(2);
      spec.instance_edge = parse_real(tok[1], line_no);
    } else if (key == "instance_color") {
      need(2);
      spec.instance_color = parse_real(tok[1], line_no);
    } else if (key == "background") {
      need(2);
      // Canvas size may still change below, so the extent is fixed up at the end.
      ShapeSpec s;
      s.kind = TargetKind::stuff;
      s.class_id = parse_int(tok[1], line_no);
      s.width = -1;
      spec.shapes.push_back(s);
    } else if (key == "rect" || key == "ellipse") {
      if (tok.size() != 7 && tok.size() != 8) {
        throw ValidationError("scene spec line " + std::to_string(line_no) + ": '" + key +
                              "' expects kind class x y w h [point=x,y]");
      }
      ShapeSpec s;
      s.type = key == "rect" ? ShapeType::rect : ShapeType::ellipse;
      s.kind = parse_target_kind(tok[1]);
      s.class_id = parse_int(tok[2], line_no);
      s.x = parse_int(tok[3], line_no);
      s.y = parse_int(tok[4], line_no);
      s.width = parse_int(tok[5], line_no);
      s.height = parse_int(tok[6], line_no);
      if (tok.size() == 8) {
        const std::string& pt = tok[7];
        const auto comma = pt.find(',');
        if (pt.rfind("point=", 0) != 0 || comma == std::string::npos) {
          throw ValidationError("scene spec line " + std::to_string(line_no) +
                                ": expected point=x,y");
        }
        s.point = std::pair{parse_int(pt.substr(6, comma - 6), line_no),
                            parse_int(pt.substr(comma + 1), line_no)};
      }
      spec.shapes.push_back(s);
    } else {
      throw ValidationError("scene spec line " + std::to_string(line_no) + ": unknown directive '" +
                            key + "'");
    }
  }
  for (auto& s : spec.shapes) {
    if (s.width == -1) {
      s.x = 0;
      s.y = 0;
      s.width = spec.width;
      s.height = spec.height;
    }
  }
  return spec;
}

SceneSpec read_scene_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_scene_spec(text);
}

SceneFiles SceneFiles::in(const fs::path& dir) {
  return {dir / "image.ppm",     dir / "semantic.pfm", dir / "boundary_high.pfm",
          dir / "boundary_low.pfm", dir / "points.txt",   dir / "gt_mask.pgm"};
}

void write_scene(const Scene& scene, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir.string() + ": " + ec.message());
  const SceneFiles files = SceneFiles::in(dir);
  write_image(scene.image, files.image);
  write_semantic_map(scene.semantic, files.semantic);
  write_boundary_map(scene.boundary_high, files.boundary_high);
  write_boundary_map(scene.boundary_low, files.boundary_low);
  write_points(scene.points, files.points);
  write_mask(scene.ground_truth, files.ground_truth);
}

Scene read_scene(const fs::path& dir) {
  const SceneFiles files = SceneFiles::in(dir);
  Scene scene;
  scene.image = read_image(files.image);
  scene.semantic = read_semantic_map(files.semantic);
  scene.boundary_high = read_boundary_map(files.boundary_high);
  scene.boundary_low = read_boundary_map(files.boundary_low);
  scene.points = read_points(files.points, scene.semantic.height, scene.semantic.width);
  scene.ground_truth = read_mask(files.ground_truth);
  return scene;
}

}  // namespace otmask
