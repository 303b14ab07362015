#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "otmask/grid_graph.hpp"
#include "otmask/matrix.hpp"
#include "otmask/task_maps.hpp"

namespace otmask {

enum class SupplyScheme { equal_division, nearest_gt, nearest_centroid };

std::string_view to_string(SupplyScheme scheme);
SupplyScheme parse_supply_scheme(std::string_view token);

/// label[j] = argmin_i cost(i, j), ties to the lowest supplier index.
std::vector<int> initial_assignment(const DenseMatrix& cost);

/// The owned pixel nearest (Euclidean) to the mean coordinate of the pixels labeled
/// `supplier`; equidistant candidates resolve to the first in row-major order.
/// Returns `fallback` when the supplier owns nothing.
PixelIndex region_centroid(std::span<const int> labels, int width, int supplier,
                           PixelIndex fallback);

struct SupplyVector {
  std::vector<std::int64_t> counts;
  SupplyScheme scheme = SupplyScheme::nearest_centroid;
  int centroid_iterations = 1;
  /// Sources of the last assignment: gt points, or refined centroids.
  std::vector<PixelIndex> sources;
  /// Per-pixel supplier labels behind the counts (empty for equal_division).
  std::vector<int> assignment;
};

/// Unit numbers for each annotation; the counts always sum to the pixel count.
SupplyVector compute_supplies(const EdgeWeightField& weights,
                              std::span<const PointAnnotation> points, SupplyScheme scheme,
                              int centroid_iterations = 1);

/// Same, reusing an already computed gt-point cost matrix.
SupplyVector compute_supplies(const EdgeWeightField& weights,
                              std::span<const PointAnnotation> points,
                              const DenseMatrix& gt_costs, SupplyScheme scheme,
                              int centroid_iterations = 1);

std::vector<PixelIndex> point_pixels(std::span<const PointAnnotation> points, int width);

}  // namespace otmask
