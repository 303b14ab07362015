#pragma once

// Scene suites shared by the unit tests and the acceptance run.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "otmask/synth.hpp"

namespace fixtures {

using otmask::SceneSpec;
using otmask::ShapeSpec;
using otmask::ShapeType;
using otmask::TargetKind;

/// Two same-class rectangles sharing an edge on a background of another class. The
/// first target is annotated at its far corner and the second at its corner touching
/// the first, so nearest-point assignment pushes the split deep into the first
/// target. The shared edge only carries a weak instance boundary.
inline SceneSpec touching_pair_spec(std::mt19937_64& rng) {
  SceneSpec spec;
  spec.height = 40;
  spec.width = 56;
  spec.classes = 2;
  spec.semantic_noise = 0.05;
  spec.instance_edge = 0.5;
  spec.shapes.push_back({ShapeType::rect, TargetKind::stuff, 0, 0, 0, spec.width, spec.height, {}});

  const int length = oracle::uniform_int(rng, 16, 24);
  const int wa = oracle::uniform_int(rng, 12, 23);
  const int wb = oracle::uniform_int(rng, 12, 23);
  const int x0 = oracle::uniform_int(rng, 4, 6);
  const int y0 = oracle::uniform_int(rng, 4, 11);
  ShapeSpec a{ShapeType::rect, TargetKind::thing, 1, x0, y0, wa, length, std::pair{x0, y0}};
  ShapeSpec b{ShapeType::rect, TargetKind::thing, 1, x0 + wa, y0, wb, length,
              std::pair{x0 + wa, y0 + length - 1}};
  const bool vertical = oracle::uniform(rng) < 0.5;
  if (vertical) {
    // Transpose the layout (still fits: the canvas is transposed too).
    std::swap(spec.height, spec.width);
    spec.shapes[0].width = spec.width;
    spec.shapes[0].height = spec.height;
    for (ShapeSpec* s : {&a, &b}) {
      std::swap(s->x, s->y);
      std::swap(s->width, s->height);
      s->point = std::pair{s->point->second, s->point->first};
    }
  }
  spec.shapes.push_back(a);
  spec.shapes.push_back(b);
  return spec;
}

inline std::vector<otmask::Scene> touching_pair_suite(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<otmask::Scene> out;
  for (int k = 0; k < count; ++k) {
    const SceneSpec spec = touching_pair_spec(rng);
    out.push_back(otmask::synth_scene(spec, seed * 1000 + static_cast<std::uint64_t>(k)));
  }
  return out;
}

/// Two to four rectangles or ellipses of random classes, pairwise separated by at
/// least two background pixels and kept off the canvas border. Noise free.
inline SceneSpec separated_spec(std::mt19937_64& rng) {
  SceneSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.classes = 4;
  spec.shapes.push_back({ShapeType::rect, TargetKind::stuff, 0, 0, 0, 32, 32, {}});
  const int targets = oracle::uniform_int(rng, 2, 4);
  int attempts = 0;
  while (static_cast<int>(spec.shapes.size()) < targets + 1 && attempts++ < 1000) {
    ShapeSpec s;
    s.type = oracle::uniform(rng) < 0.5 ? ShapeType::rect : ShapeType::ellipse;
    s.kind = TargetKind::thing;
    s.class_id = oracle::uniform_int(rng, 1, 3);
    s.width = oracle::uniform_int(rng, 5, 11);
    s.height = oracle::uniform_int(rng, 5, 11);
    s.x = oracle::uniform_int(rng, 2, 30 - s.width);
    s.y = oracle::uniform_int(rng, 2, 30 - s.height);
    bool clear = true;
    for (std::size_t k = 1; k < spec.shapes.size(); ++k) {
      const ShapeSpec& o = spec.shapes[k];
      const bool apart = s.x >= o.x + o.width + 2 || o.x >= s.x + s.width + 2 ||
                         s.y >= o.y + o.height + 2 || o.y >= s.y + s.height + 2;
      clear = clear && apart;
    }
    if (clear) spec.shapes.push_back(s);
  }
  return spec;
}

inline std::vector<otmask::Scene> separated_suite(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<otmask::Scene> out;
  for (int k = 0; k < count; ++k) {
    const SceneSpec spec = separated_spec(rng);
    out.push_back(otmask::synth_scene(spec, seed * 1000 + static_cast<std::uint64_t>(k)));
  }
  return out;
}

}  // namespace fixtures
