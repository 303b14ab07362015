#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "otmask/task_maps.hpp"

namespace otmask {

struct LossConfig {
  double alpha1 = 3.0;
  double alpha2 = 3.0;
  /// LAB similarity threshold.
  double tau = 0.3;
  /// LAB kernel scale.
  double theta1 = 2.0;
  /// RGB tree similarity scale.
  double theta2 = 0.02;
};

/// Lower clamp for every log argument.
inline constexpr double kProbabilityFloor = 1e-12;

/// A loss value and its gradient with respect to the map it was evaluated on
/// (same layout as the map's `values`).
struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Mean of -log p(point, class) over annotated points.
LossValue partial_cross_entropy(const SemanticMap& semantic,
                                std::span<const PointAnnotation> points);

/// sRGB in [0,1] to CIELAB under D65.
std::array<double, 3> srgb_to_lab(const std::array<double, 3>& rgb);

/// Local color-affinity term: -(1/z) * sum over ordered 8-neighbor pairs with
/// exp(-|lab_i - lab_j| / theta1) >= tau of log(P_i . P_j). Zero if no pair qualifies.
LossValue lab_affinity_loss(const SemanticMap& semantic, const RgbImage& image,
                            const LossConfig& config = {});

struct TreeEdge {
  PixelIndex a = 0;
  PixelIndex b = 0;
  double weight = 0.0;
};

struct SpanningTree {
  std::size_t vertex_count = 0;
  std::vector<TreeEdge> edges;

  double total_weight() const;
};

/// Minimum spanning tree of the 8-connected grid with squared RGB distance as edge
/// weight. Equal weights are ordered by endpoint indices, so the tree is unique.
SpanningTree build_mst(const RgbImage& image);

enum class TreeFilterMethod { tree_dp, naive };

/// Long-range tree-filter term: mean over pixels and channels of
/// |P_i - sum_j S_ij P_j / sum_j S_ij| with S_ij = exp(-(tree path weight)/theta2).
/// `tree_dp` runs in O(n) per channel; `naive` materializes all pairwise paths.
LossValue rgb_tree_loss(const SemanticMap& semantic, const SpanningTree& tree,
                        const LossConfig& config = {},
                        TreeFilterMethod method = TreeFilterMethod::tree_dp);

/// Boundary affinity term over 8-neighbor pairs of the pseudo-mask. The gradient is
/// with respect to the boundary values.
LossValue boundary_affinity_loss(const BoundaryMap& boundary_high, const PseudoMask& mask);

struct SemanticLossTerms {
  double partial = 0.0;
  double lab = 0.0;
  double rgb = 0.0;
  double total = 0.0;
};

double combine_semantic_terms(double partial, double lab, double rgb, const LossConfig& config);

SemanticLossTerms semantic_loss_terms(const SemanticMap& semantic, const RgbImage& image,
                                      std::span<const PointAnnotation> points,
                                      const SpanningTree& tree, const LossConfig& config = {});

/// partial + alpha1 * lab + alpha2 * rgb.
double semantic_loss_total(const SemanticMap& semantic, const RgbImage& image,
                           std::span<const PointAnnotation> points, const SpanningTree& tree,
                           const LossConfig& config = {});

using LossEvaluator = std::function<LossValue(std::span<const double>)>;

/// Largest relative error between central differences and the analytic gradient,
/// over coordinates whose analytic gradient exceeds 1e-8 in magnitude. When
/// `coordinates` is empty every coordinate is checked.
double finite_difference_check(const LossEvaluator& evaluator, std::span<const double> input,
                               double step, std::span<const std::size_t> coordinates = {});

}  // namespace otmask
