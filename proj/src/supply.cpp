#include "otmask/supply.hpp"

#include <limits>
#include <string>

#include "otmask/errors.hpp"

namespace otmask {

std::string_view to_string(SupplyScheme scheme) {
  switch (scheme) {
    case SupplyScheme::equal_division:
      return "equal_division";
    case SupplyScheme::nearest_gt:
      return "nearest_gt";
    case SupplyScheme::nearest_centroid:
      return "nearest_centroid";
  }
  return "unknown";
}

SupplyScheme parse_supply_scheme(std::string_view token) {
  if (token == "equal_division") return SupplyScheme::equal_division;
  if (token == "nearest_gt") return SupplyScheme::nearest_gt;
  if (token == "nearest_centroid") return SupplyScheme::nearest_centroid;
  throw ValidationError("unknown supply scheme '" + std::string(token) +
                        "' (expected equal_division, nearest_gt or nearest_centroid)");
}

std::vector<int> initial_assignment(const DenseMatrix& cost) {
  if (cost.rows() == 0) throw ValidationError("assignment needs at least one supplier");
  std::vector<int> labels(cost.cols(), 0);
  for (std::size_t j = 0; j < cost.cols(); ++j) {
    double best = cost(0, j);
    for (std::size_t i = 1; i < cost.rows(); ++i) {
      if (cost(i, j) < best) {
        best = cost(i, j);
        labels[j] = static_cast<int>(i);
      }
    }
  }
  return labels;
}

PixelIndex region_centroid(std::span<const int> labels, int width, int supplier,
                           PixelIndex fallback) {
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t count = 0;
  for (PixelIndex p = 0; p < labels.size(); ++p) {
    if (labels[p] != supplier) continue;
    sum_x += static_cast<double>(p % width);
    sum_y += static_cast<double>(p / width);
    ++count;
  }
  if (count == 0) return fallback;
  const double mx = sum_x / static_cast<double>(count);
  const double my = sum_y / static_cast<double>(count);
  PixelIndex best = fallback;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (PixelIndex p = 0; p < labels.size(); ++p) {
    if (labels[p] != supplier) continue;
    const double dx = static_cast<double>(p % width) - mx;
    const double dy = static_cast<double>(p / width) - my;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = p;
    }
  }
  return best;
}

std::vector<PixelIndex> point_pixels(std::span<const PointAnnotation> points, int width) {
  std::vector<PixelIndex> pixels;
  pixels.reserve(points.size());
  for (const auto& p : points) pixels.push_back(p.pixel(width));
  return pixels;
}

namespace {

std::vector<std::int64_t> count_labels(std::span<const int> labels, std::size_t m) {
  std::vector<std::int64_t> counts(m, 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

}  // namespace

SupplyVector compute_supplies(const EdgeWeightField& weights,
                              std::span<const PointAnnotation> points, SupplyScheme scheme,
                              int centroid_iterations) {
  if (points.empty()) throw ValidationError("supply computation needs at least one point");
  if (scheme == SupplyScheme::equal_division) {
    return compute_supplies(weights, points, DenseMatrix{}, scheme, centroid_iterations);
  }
  const auto sources = point_pixels(points, weights.width());
  return compute_supplies(weights, points, build_cost_matrix(weights, sources), scheme,
                          centroid_iterations);
}

SupplyVector compute_supplies(const EdgeWeightField& weights,
                              std::span<const PointAnnotation> points,
                              const DenseMatrix& gt_costs, SupplyScheme scheme,
                              int centroid_iterations) {
  const std::size_t m = points.size();
  const std::size_t n = weights.pixel_count();
  if (m == 0) throw ValidationError("supply computation needs at least one point");
  if (centroid_iterations < 1) throw ValidationError("centroid iterations must be >= 1");
  validate_points(points, weights.height(), weights.width());

  SupplyVector out;
  out.scheme = scheme;
  out.centroid_iterations = centroid_iterations;
  out.sources = point_pixels(points, weights.width());

  if (scheme == SupplyScheme::equal_division) {
    out.counts.assign(m, static_cast<std::int64_t>(n / m));
    for (std::size_t i = 0; i < n % m; ++i) ++out.counts[i];
    return out;
  }

  if (gt_costs.rows() != m || gt_costs.cols() != n) {
    throw ShapeError("gt cost matrix does not match points and grid");
  }
  out.assignment = initial_assignment(gt_costs);
  if (scheme == SupplyScheme::nearest_centroid) {
    const auto gt_sources = out.sources;
    for (int it = 0; it < centroid_iterations; ++it) {
      std::vector<PixelIndex> centroids(m);
      for (std::size_t i = 0; i < m; ++i) {
        centroids[i] = region_centroid(out.assignment, weights.width(), static_cast<int>(i),
                                       gt_sources[i]);
      }
      out.assignment = initial_assignment(build_cost_matrix(weights, centroids));
      out.sources = std::move(centroids);
    }
  }
  out.counts = count_labels(out.assignment, m);
  return out;
}

}  // namespace otmask
