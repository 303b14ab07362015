#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "otmask/matrix.hpp"
#include "otmask/task_maps.hpp"

namespace otmask {

/// 8-neighborhood as (dy, dx). Direction d and 7 - d are opposite.
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets = {{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};

constexpr int opposite_direction(int direction) { return 7 - direction; }

/// Symmetric nonnegative edge lengths of the 8-connected pixel graph.
class EdgeWeightField {
 public:
  EdgeWeightField(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  std::optional<PixelIndex> neighbor(PixelIndex pixel, int direction) const;

  /// Length of the edge from pixel towards direction; 0 for directions leaving the grid.
  double weight(PixelIndex pixel, int direction) const { return weights_[pixel * 8 + direction]; }

  /// Sets both half-edges. Rejects non-finite or negative lengths and off-grid edges.
  void set_weight(PixelIndex pixel, int direction, double length);

 private:
  int height_;
  int width_;
  std::vector<double> weights_;
};

struct EdgeWeightOptions {
  double beta = 0.1;
  /// Added to every edge so geodesic costs grow strictly with hop count.
  double edge_floor = 1e-6;
};

/// length(k,l) = 0.5 * |P(k) - P(l)|_1 + beta * max(B(k), B(l)) + edge_floor.
EdgeWeightField build_edge_weights(const SemanticMap& semantic, const BoundaryMap& boundary,
                                   const EdgeWeightOptions& options = {});

struct CostField {
  int height = 0;
  int width = 0;
  std::vector<double> cost;
};

/// Single-source shortest path lengths (Dijkstra).
CostField geodesic_costs(const EdgeWeightField& weights, PixelIndex source);

/// Row i holds the geodesic costs from sources[i], in row-major pixel order.
DenseMatrix build_cost_matrix(const EdgeWeightField& weights, std::span<const PixelIndex> sources);

}  // namespace otmask
