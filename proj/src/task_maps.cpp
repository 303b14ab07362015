#include "otmask/task_maps.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "otmask/errors.hpp"

namespace otmask {

namespace {

std::string pixel_name(PixelIndex pixel, int width) {
  std::ostringstream out;
  out << "pixel " << pixel << " (x=" << pixel % width << ", y=" << pixel / width << ")";
  return out.str();
}

}  // namespace

std::string_view to_string(TargetKind kind) {
  return kind == TargetKind::thing ? "thing" : "stuff";
}

TargetKind parse_target_kind(std::string_view token) {
  if (token == "thing") return TargetKind::thing;
  if (token == "stuff") return TargetKind::stuff;
  throw ValidationError("unknown target kind '" + std::string(token) +
                        "' (expected thing or stuff)");
}

SemanticMap::SemanticMap(int h, int w, int c)
    : height(h), width(w), channels(c),
      values(static_cast<std::size_t>(h) * w * c, 0.0) {}

void SemanticMap::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("semantic map has an empty grid");
  if (channels < 1) throw ShapeError("semantic map needs at least one channel");
  if (values.size() != pixel_count() * channels) {
    throw ShapeError("semantic map payload size does not match its shape");
  }
  for (PixelIndex p = 0; p < pixel_count(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double v = at(p, c);
      if (!std::isfinite(v)) {
        throw ValidationError("semantic map: non-finite value at " + pixel_name(p, width));
      }
      if (v < 0.0 || v > 1.0) {
        throw ValidationError("semantic map: probability outside [0,1] at " +
                              pixel_name(p, width));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      std::ostringstream out;
      out << "semantic map: probabilities sum to " << sum << " at " << pixel_name(p, width);
      throw ValidationError(out.str());
    }
  }
}

BoundaryMap::BoundaryMap(int h, int w, double fill)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

void BoundaryMap::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("boundary map has an empty grid");
  if (values.size() != pixel_count()) {
    throw ShapeError("boundary map payload size does not match its shape");
  }
  for (PixelIndex p = 0; p < pixel_count(); ++p) {
    if (!std::isfinite(values[p])) {
      throw ValidationError("boundary map: non-finite value at " + pixel_name(p, width));
    }
    if (values[p] < 0.0 || values[p] > 1.0) {
      throw ValidationError("boundary map: value outside [0,1] at " + pixel_name(p, width));
    }
  }
}

RgbImage::RgbImage(int h, int w, double fill)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, fill) {}

void validate_points(std::span<const PointAnnotation> points, int height, int width,
                     int channels) {
  if (points.empty()) throw ValidationError("point annotation set is empty");
  std::set<int> seen;
  for (const auto& p : points) {
    if (p.target_id < 1) {
      throw ValidationError("target id " + std::to_string(p.target_id) + " must be >= 1");
    }
    if (!seen.insert(p.target_id).second) {
      throw ValidationError("duplicate target id " + std::to_string(p.target_id));
    }
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
      std::ostringstream out;
      out << "target " << p.target_id << ": point (" << p.x << ", " << p.y
          << ") outside " << width << "x" << height << " image";
      throw ValidationError(out.str());
    }
    if (p.class_id < 0 || (channels > 0 && p.class_id >= channels)) {
      std::ostringstream out;
      out << "target " << p.target_id << ": class id " << p.class_id << " outside [0, "
          << channels << ")";
      throw ValidationError(out.str());
    }
  }
}

void PseudoMask::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("mask has an empty grid");
  if (target.size() != pixel_count()) throw ShapeError("mask payload size does not match");
  for (PixelIndex p = 0; p < target.size(); ++p) {
    if (target[p] == 0) {
      throw ValidationError("mask: unassigned target 0 at " + pixel_name(p, width));
    }
    if (!lookup.contains(target[p])) {
      throw ValidationError("mask: target " + std::to_string(target[p]) + " at " +
                            pixel_name(p, width) + " missing from the label table");
    }
  }
}

std::map<int, TargetInfo> lookup_from_points(std::span<const PointAnnotation> points) {
  std::map<int, TargetInfo> lookup;
  for (const auto& p : points) lookup[p.target_id] = {p.class_id, p.kind};
  return lookup;
}

PseudoMask mask_from_supplier_labels(std::span<const int> labels,
                                     std::span<const PointAnnotation> points, int height,
                                     int width) {
  PseudoMask mask;
  mask.height = height;
  mask.width = width;
  mask.target.assign(labels.size(), 0);
  mask.lookup = lookup_from_points(points);
  for (PixelIndex p = 0; p < labels.size(); ++p) {
    const int supplier = labels[p];
    if (supplier < 0 || static_cast<std::size_t>(supplier) >= points.size()) {
      throw InvariantViolation("supplier label out of range at pixel " + std::to_string(p));
    }
    mask.target[p] = points[supplier].target_id;
  }
  return mask;
}

BoundaryMap low_level_boundary(const RgbImage& image) {
  const int h = image.height;
  const int w = image.width;
  std::vector<double> luma(image.pixel_count());
  for (PixelIndex p = 0; p < luma.size(); ++p) {
    luma[p] = 0.299 * image.at(p, 0) + 0.587 * image.at(p, 1) + 0.114 * image.at(p, 2);
  }
  auto L = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return luma[static_cast<PixelIndex>(y) * w + x];
  };

  BoundaryMap out(h, w, 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (L(y, x + 1) - L(y, x - 1));
      const double gy = 0.5 * (L(y + 1, x) - L(y - 1, x));
      const double mag = std::hypot(gx, gy);
      out.values[static_cast<PixelIndex>(y) * w + x] = mag;
      peak = std::max(peak, mag);
    }
  }
  // Floating-point noise from luminance weighting stays below this threshold.
  if (peak <= 1e-12) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (auto& v : out.values) v = v <= 1e-12 ? 0.0 : v / peak;
  return out;
}

}  // namespace otmask
