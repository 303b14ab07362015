#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "otmask/task_maps.hpp"

namespace otmask {

enum class ShapeType { rect, ellipse };

/// A target drawn into the canvas. Both shape types are given by their bounding box;
/// an ellipse is inscribed in it. Later shapes paint over earlier ones.
struct ShapeSpec {
  ShapeType type = ShapeType::rect;
  TargetKind kind = TargetKind::thing;
  int class_id = 0;
  int x = 0;
  int y = 0;
  int width = 1;
  int height = 1;
  /// Annotated pixel; sampled uniformly from the visible target when absent.
  std::optional<std::pair<int, int>> point;
};

struct SceneSpec {
  int height = 32;
  int width = 32;
  int classes = 2;
  /// Semantic map = (1 - blur) * one_hot + blur * box3(one_hot), blur in [0, 0.5).
  double blur = 0.25;
  /// Uniform [0, semantic_noise) added per channel before renormalizing.
  double semantic_noise = 0.0;
  /// Uniform [-image_noise, image_noise] added per color channel.
  double image_noise = 0.0;
  /// High-level boundary strength on outlines between different classes.
  double class_edge = 1.0;
  /// High-level boundary strength on outlines between same-class targets.
  double instance_edge = 1.0;
  /// Per-target color offset amplitude around its class color.
  double instance_color = 0.0;
  std::vector<ShapeSpec> shapes;
};

struct Scene {
  RgbImage image;
  SemanticMap semantic;
  BoundaryMap boundary_high;
  BoundaryMap boundary_low;
  PointSet points;
  /// Target ids are shape indices + 1.
  PseudoMask ground_truth;
};

/// Deterministic for a given (spec, seed). Rejects shapes outside the canvas, class
/// ids outside [0, classes), targets left invisible by later shapes, and explicit
/// points that do not land on their own target.
Scene synth_scene(const SceneSpec& spec, std::uint64_t seed);

/// Pixels with a 4-neighbor belonging to a different target.
std::vector<PixelIndex> outline_pixels(const PseudoMask& mask);

/// Plain-text scene description, one directive per line:
///   height H | width W | classes N | blur B | semantic_noise S | image_noise S
///   class_edge V | instance_edge V | instance_color A
///   background CLASS                         (full-canvas stuff target)
///   rect|ellipse thing|stuff CLASS X Y W H [point=PX,PY]
SceneSpec parse_scene_spec(std::string_view text);
SceneSpec read_scene_spec(const std::filesystem::path& path);

/// Fixture directory layout shared by `synth` and the scene-based CLI commands.
struct SceneFiles {
  std::filesystem::path image;
  std::filesystem::path semantic;
  std::filesystem::path boundary_high;
  std::filesystem::path boundary_low;
  std::filesystem::path points;
  std::filesystem::path ground_truth;

  static SceneFiles in(const std::filesystem::path& dir);
};

void write_scene(const Scene& scene, const std::filesystem::path& dir);
Scene read_scene(const std::filesystem::path& dir);

}  // namespace otmask
