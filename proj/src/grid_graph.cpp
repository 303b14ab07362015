#include "otmask/grid_graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>

#include "otmask/errors.hpp"

namespace otmask {

EdgeWeightField::EdgeWeightField(int height, int width)
    : height_(height), width_(width), weights_(static_cast<std::size_t>(height) * width * 8, 0.0) {
  if (height <= 0 || width <= 0) throw ShapeError("edge weight field needs a non-empty grid");
}

std::optional<PixelIndex> EdgeWeightField::neighbor(PixelIndex pixel, int direction) const {
  const int y = static_cast<int>(pixel / width_) + kNeighborOffsets[direction][0];
  const int x = static_cast<int>(pixel % width_) + kNeighborOffsets[direction][1];
  if (y < 0 || x < 0 || y >= height_ || x >= width_) return std::nullopt;
  return static_cast<PixelIndex>(y) * width_ + x;
}

void EdgeWeightField::set_weight(PixelIndex pixel, int direction, double length) {
  if (!std::isfinite(length) || length < 0.0) {
    throw ValidationError("edge length must be finite and nonnegative");
  }
  const auto other = neighbor(pixel, direction);
  if (!other) throw ValidationError("edge leaves the grid");
  weights_[pixel * 8 + direction] = length;
  weights_[*other * 8 + opposite_direction(direction)] = length;
}

EdgeWeightField build_edge_weights(const SemanticMap& semantic, const BoundaryMap& boundary,
                                   const EdgeWeightOptions& options) {
  if (semantic.height != boundary.height || semantic.width != boundary.width) {
    throw ShapeError("semantic map and boundary map have different shapes");
  }
  if (semantic.channels < 1 || semantic.values.size() != semantic.pixel_count() * semantic.channels ||
      boundary.values.size() != boundary.pixel_count()) {
    throw ShapeError("map payload does not match its shape");
  }
  if (!(options.beta >= 0.0) || !std::isfinite(options.beta)) {
    throw ValidationError("beta must be finite and >= 0");
  }
  if (!(options.edge_floor >= 0.0) || !std::isfinite(options.edge_floor)) {
    throw ValidationError("edge floor must be finite and >= 0");
  }
  for (double v : semantic.values) {
    if (std::isnan(v)) throw ValidationError("semantic map contains NaN");
  }
  for (double v : boundary.values) {
    if (std::isnan(v)) throw ValidationError("boundary map contains NaN");
  }

  EdgeWeightField field(semantic.height, semantic.width);
  const int channels = semantic.channels;
  for (PixelIndex k = 0; k < field.pixel_count(); ++k) {
    // Directions 4..7 cover each undirected edge exactly once.
    for (int d = 4; d < 8; ++d) {
      const auto l = field.neighbor(k, d);
      if (!l) continue;
      double l1 = 0.0;
      for (int c = 0; c < channels; ++c) l1 += std::abs(semantic.at(k, c) - semantic.at(*l, c));
      const double ds = 0.5 * l1;
      const double db = std::max(boundary.at(k), boundary.at(*l));
      field.set_weight(k, d, ds + options.beta * db + options.edge_floor);
    }
  }
  return field;
}

CostField geodesic_costs(const EdgeWeightField& weights, PixelIndex source) {
  const std::size_t n = weights.pixel_count();
  if (source >= n) throw ValidationError("geodesic source outside the grid");

  CostField out{weights.height(), weights.width(),
                std::vector<double>(n, std::numeric_limits<double>::infinity())};
  std::vector<char> settled(n, 0);
  using Entry = std::pair<double, PixelIndex>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  out.cost[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, k] = heap.top();
    heap.pop();
    if (settled[k]) continue;
    settled[k] = 1;
    for (int dir = 0; dir < 8; ++dir) {
      const auto l = weights.neighbor(k, dir);
      if (!l || settled[*l]) continue;
      const double candidate = d + weights.weight(k, dir);
      if (candidate < out.cost[*l]) {
        out.cost[*l] = candidate;
        heap.emplace(candidate, *l);
      }
    }
  }
  return out;
}

DenseMatrix build_cost_matrix(const EdgeWeightField& weights, std::span<const PixelIndex> sources) {
  if (sources.empty()) throw ValidationError("cost matrix needs at least one source");
  DenseMatrix cost(sources.size(), weights.pixel_count());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const CostField field = geodesic_costs(weights, sources[i]);
    std::copy(field.cost.begin(), field.cost.end(), cost.row(i).begin());
  }
  return cost;
}

}  // namespace otmask
