#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "otmask/grid_graph.hpp"
#include "otmask/ot_solver.hpp"
#include "otmask/supply.hpp"
#include "otmask/task_maps.hpp"

namespace otmask {

enum class BoundaryCombine { max, high_only, low_only };

std::string_view to_string(BoundaryCombine mode);
BoundaryCombine parse_boundary_combine(std::string_view token);

struct PipelineConfig {
  double beta = 0.1;
  double lambda = 0.1;
  int sinkhorn_iterations = 80;
  SupplyScheme supply_scheme = SupplyScheme::nearest_centroid;
  int centroid_iterations = 1;
  BoundaryCombine boundary_combine = BoundaryCombine::max;
  bool cost_from_centroids = false;
  bool log_domain = false;
  bool normalize_cost = true;
  double edge_floor = 1e-6;

  void validate() const;
  SinkhornConfig sinkhorn() const;
};

/// Per-pixel merge of high- and low-level boundary evidence.
BoundaryMap combine_boundaries(const BoundaryMap& high, const BoundaryMap& low,
                               BoundaryCombine mode);

/// Everything up to (not including) the transport solve.
struct TransportSetup {
  EdgeWeightField weights;
  /// Geodesic costs from the gt points, one row per annotation.
  DenseMatrix gt_costs;
  SupplyVector supply;
  /// Problem handed to the solver: costs from gt points (or centroids), supply
  /// counts, unit demand per pixel.
  TransportProblem problem;
};

TransportSetup prepare_transport(const SemanticMap& semantic, const BoundaryMap& boundary_high,
                                 const BoundaryMap& boundary_low,
                                 std::span<const PointAnnotation> points,
                                 const PipelineConfig& config);

struct TargetDiagnostics {
  int target_id = 0;
  int class_id = 0;
  TargetKind kind = TargetKind::thing;
  std::int64_t supply = 0;
  std::int64_t pixels = 0;
};

struct PipelineDiagnostics {
  double marginal_error = 0.0;
  double transport_cost = 0.0;
  std::vector<TargetDiagnostics> targets;
};

struct PipelineResult {
  PseudoMask mask;
  TransportPlan plan;
  PipelineDiagnostics diagnostics;
};

/// Point annotations to a dense pseudo-mask through global optimal transport.
PipelineResult generate_pseudo_mask(const SemanticMap& semantic, const BoundaryMap& boundary_high,
                                    const BoundaryMap& boundary_low,
                                    std::span<const PointAnnotation> points,
                                    const PipelineConfig& config = {});

/// target(j) = target id of argmax_i gamma(i, j); ties go to the lowest supplier index.
PseudoMask decode_plan(const TransportPlan& plan, std::span<const PointAnnotation> points,
                       int height, int width);

/// Independent per-pixel argmin assignment (the MC baseline).
PseudoMask minimum_cost_baseline(const DenseMatrix& cost, std::span<const PointAnnotation> points,
                                 int height, int width);

/// Pixels per target id, in annotation order.
std::vector<std::int64_t> target_pixel_counts(const PseudoMask& mask,
                                              std::span<const PointAnnotation> points);

}  // namespace otmask
