#include "otmask/pseudomask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otmask/errors.hpp"

namespace otmask {

std::string_view to_string(BoundaryCombine mode) {
  switch (mode) {
    case BoundaryCombine::max:
      return "max";
    case BoundaryCombine::high_only:
      return "high_only";
    case BoundaryCombine::low_only:
      return "low_only";
  }
  return "unknown";
}

BoundaryCombine parse_boundary_combine(std::string_view token) {
  if (token == "max") return BoundaryCombine::max;
  if (token == "high_only") return BoundaryCombine::high_only;
  if (token == "low_only") return BoundaryCombine::low_only;
  throw ValidationError("unknown boundary combine mode '" + std::string(token) +
                        "' (expected max, high_only or low_only)");
}

void PipelineConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be >= 0");
  if (!(edge_floor >= 0.0) || !std::isfinite(edge_floor)) {
    throw ValidationError("edge floor must be >= 0");
  }
  if (centroid_iterations < 1) throw ValidationError("centroid iterations must be >= 1");
  sinkhorn().validate();
}

SinkhornConfig PipelineConfig::sinkhorn() const {
  return {lambda, sinkhorn_iterations, log_domain, normalize_cost};
}

BoundaryMap combine_boundaries(const BoundaryMap& high, const BoundaryMap& low,
                               BoundaryCombine mode) {
  if (high.height != low.height || high.width != low.width) {
    throw ShapeError("high- and low-level boundary maps have different shapes");
  }
  switch (mode) {
    case BoundaryCombine::high_only:
      return high;
    case BoundaryCombine::low_only:
      return low;
    case BoundaryCombine::max:
      break;
  }
  BoundaryMap out(high.height, high.width);
  for (PixelIndex p = 0; p < out.pixel_count(); ++p) {
    out.values[p] = std::max(high.values[p], low.values[p]);
  }
  return out;
}

TransportSetup prepare_transport(const SemanticMap& semantic, const BoundaryMap& boundary_high,
                                 const BoundaryMap& boundary_low,
                                 std::span<const PointAnnotation> points,
                                 const PipelineConfig& config) {
  config.validate();
  semantic.validate();
  boundary_high.validate();
  boundary_low.validate();
  if (semantic.height != boundary_high.height || semantic.width != boundary_high.width) {
    throw ShapeError("semantic and boundary maps have different shapes");
  }
  validate_points(points, semantic.height, semantic.width, semantic.channels);

  const BoundaryMap boundary =
      combine_boundaries(boundary_high, boundary_low, config.boundary_combine);
  EdgeWeightField weights =
      build_edge_weights(semantic, boundary, {config.beta, config.edge_floor});
  DenseMatrix gt_costs = build_cost_matrix(weights, point_pixels(points, semantic.width));
  SupplyVector supply = compute_supplies(weights, points, gt_costs, config.supply_scheme,
                                         config.centroid_iterations);

  TransportProblem problem;
  problem.cost = config.cost_from_centroids ? build_cost_matrix(weights, supply.sources) : gt_costs;
  problem.supply.assign(supply.counts.begin(), supply.counts.end());
  problem.demand.assign(weights.pixel_count(), 1.0);
  return {std::move(weights), std::move(gt_costs), std::move(supply), std::move(problem)};
}

PipelineResult generate_pseudo_mask(const SemanticMap& semantic, const BoundaryMap& boundary_high,
                                    const BoundaryMap& boundary_low,
                                    std::span<const PointAnnotation> points,
                                    const PipelineConfig& config) {
  const TransportSetup setup =
      prepare_transport(semantic, boundary_high, boundary_low, points, config);

  PipelineResult result;
  result.plan = sinkhorn_solve(setup.problem, config.sinkhorn());
  result.mask = decode_plan(result.plan, points, semantic.height, semantic.width);
  result.mask.validate();

  result.diagnostics.marginal_error = result.plan.marginal_error;
  result.diagnostics.transport_cost = plan_cost(setup.problem, result.plan);
  const auto pixels = target_pixel_counts(result.mask, points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.diagnostics.targets.push_back({points[i].target_id, points[i].class_id, points[i].kind,
                                          setup.supply.counts[i], pixels[i]});
  }
  return result;
}

PseudoMask decode_plan(const TransportPlan& plan, std::span<const PointAnnotation> points,
                       int height, int width) {
  const std::size_t m = plan.gamma.rows();
  const std::size_t n = plan.gamma.cols();
  if (m != points.size()) throw ShapeError("plan rows do not match the annotation count");
  if (n != static_cast<std::size_t>(height) * width) {
    throw ShapeError("plan columns do not match the pixel count");
  }
  std::vector<int> labels(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = plan.gamma(0, j);
    for (std::size_t i = 1; i < m; ++i) {
      if (plan.gamma(i, j) > best) {
        best = plan.gamma(i, j);
        labels[j] = static_cast<int>(i);
      }
    }
    if (!(best > 0.0)) {
      throw InvariantViolation("transport plan column " + std::to_string(j) +
                               " carries no mass");
    }
  }
  return mask_from_supplier_labels(labels, points, height, width);
}

PseudoMask minimum_cost_baseline(const DenseMatrix& cost, std::span<const PointAnnotation> points,
                                 int height, int width) {
  if (cost.rows() != points.size()) throw ShapeError("cost rows do not match the annotation count");
  if (cost.cols() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("cost columns do not match the pixel count");
  }
  return mask_from_supplier_labels(initial_assignment(cost), points, height, width);
}

std::vector<std::int64_t> target_pixel_counts(const PseudoMask& mask,
                                              std::span<const PointAnnotation> points) {
  std::vector<std::int64_t> counts(points.size(), 0);
  for (int id : mask.target) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].target_id == id) {
        ++counts[i];
        break;
      }
    }
  }
  return counts;
}

}  // namespace otmask
