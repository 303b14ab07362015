#pragma once

#include <map>
#include <optional>
#include <span>

#include "otmask/task_maps.hpp"

namespace otmask {

/// |a ∩ b| / |a ∪ b| over pixel index sets (duplicates are ignored). Two empty sets
/// are rejected.
double segment_iou(std::span<const PixelIndex> a, std::span<const PixelIndex> b);

struct ClassScore {
  int class_id = 0;
  TargetKind kind = TargetKind::thing;
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

struct PanopticScore {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  /// Empty when no class of that kind appears.
  std::optional<double> pq_thing;
  std::optional<double> pq_stuff;
  std::map<int, ClassScore> per_class;
};

/// Panoptic quality. Segments match when they share a class and IoU > 0.5. Stuff
/// segments of the same class are merged on each side before matching, and the
/// aggregate averages over classes present in either mask.
PanopticScore panoptic_quality(const PseudoMask& pred, const PseudoMask& gt);

/// Mean over gt target ids of IoU(gt segment, pred pixels with the same id).
double mean_target_iou(const PseudoMask& pred, const PseudoMask& gt);

}  // namespace otmask
