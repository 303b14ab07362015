#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace otmask {

using PixelIndex = std::size_t;

enum class TargetKind { thing, stuff };

std::string_view to_string(TargetKind kind);
/// Accepts "thing" or "stuff"; anything else is a ValidationError.
TargetKind parse_target_kind(std::string_view token);

/// Per-pixel class probabilities, stored pixel-major: values[pixel * channels + c].
///
/// Construction does not enforce the simplex constraint so that loss evaluators can
/// be probed with perturbed values. Call validate() wherever a real probability map
/// is required (codecs and the pseudo-mask pipeline do).
struct SemanticMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  SemanticMap() = default;
  SemanticMap(int height, int width, int channels);

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  double& at(PixelIndex pixel, int c) { return values[pixel * channels + c]; }
  double at(PixelIndex pixel, int c) const { return values[pixel * channels + c]; }
  std::span<const double> probabilities(PixelIndex pixel) const {
    return {values.data() + pixel * channels, static_cast<std::size_t>(channels)};
  }

  /// Throws ValidationError naming the first pixel that is non-finite, outside [0,1],
  /// or whose probabilities do not sum to 1 within 1e-6.
  void validate() const;

  bool operator==(const SemanticMap&) const = default;
};

/// One-channel boundary strength in [0,1].
struct BoundaryMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  BoundaryMap() = default;
  BoundaryMap(int height, int width, double fill = 0.0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  double& at(PixelIndex pixel) { return values[pixel]; }
  double at(PixelIndex pixel) const { return values[pixel]; }

  void validate() const;

  bool operator==(const BoundaryMap&) const = default;
};

/// RGB image with channel values in [0,1], stored values[pixel * 3 + channel].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  RgbImage() = default;
  RgbImage(int height, int width, double fill = 0.0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  double& at(PixelIndex pixel, int channel) { return values[pixel * 3 + channel]; }
  double at(PixelIndex pixel, int channel) const { return values[pixel * 3 + channel]; }

  bool operator==(const RgbImage&) const = default;
};

struct PointAnnotation {
  int target_id = 0;
  int class_id = 0;
  TargetKind kind = TargetKind::thing;
  int x = 0;
  int y = 0;

  PixelIndex pixel(int width) const { return static_cast<PixelIndex>(y) * width + x; }
  bool operator==(const PointAnnotation&) const = default;
};

using PointSet = std::vector<PointAnnotation>;

/// Checks non-emptiness, unique target ids (>= 1), coordinates inside the grid and,
/// when channels > 0, class ids inside [0, channels).
void validate_points(std::span<const PointAnnotation> points, int height, int width,
                     int channels = 0);

struct TargetInfo {
  int class_id = 0;
  TargetKind kind = TargetKind::thing;
  bool operator==(const TargetInfo&) const = default;
};

/// Dense target-id labeling. Id 0 means "unassigned" and never survives validate().
struct PseudoMask {
  int height = 0;
  int width = 0;
  std::vector<int> target;
  std::map<int, TargetInfo> lookup;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  void validate() const;

  bool operator==(const PseudoMask&) const = default;
};

/// Lookup table target_id -> (class, kind) built from an annotation set.
std::map<int, TargetInfo> lookup_from_points(std::span<const PointAnnotation> points);

/// Turns a per-pixel supplier index labeling into a mask keyed by target ids.
PseudoMask mask_from_supplier_labels(std::span<const int> labels,
                                     std::span<const PointAnnotation> points, int height,
                                     int width);

/// Luminance gradient magnitude (3x3 central differences, clamped borders),
/// max-normalized to [0,1]. A constant image yields all zeros.
BoundaryMap low_level_boundary(const RgbImage& image);

}  // namespace otmask
