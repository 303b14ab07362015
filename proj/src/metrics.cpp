#include "otmask/metrics.hpp"

#include <algorithm>
#include <vector>

#include "otmask/errors.hpp"

namespace otmask {

namespace {

struct Segment {
  int class_id;
  TargetKind kind;
  std::size_t area = 0;
};

struct Segmentation {
  std::vector<Segment> segments;
  std::vector<std::size_t> segment_of_pixel;
};

// Things keep one segment per target id; stuff collapses to one segment per class.
Segmentation segment(const PseudoMask& mask) {
  Segmentation out;
  out.segment_of_pixel.resize(mask.target.size());
  std::map<int, std::size_t> thing_segment;
  std::map<int, std::size_t> stuff_segment;
  for (PixelIndex p = 0; p < mask.target.size(); ++p) {
    const TargetInfo& info = mask.lookup.at(mask.target[p]);
    auto& index = info.kind == TargetKind::thing ? thing_segment : stuff_segment;
    const int key = info.kind == TargetKind::thing ? mask.target[p] : info.class_id;
    auto [it, inserted] = index.emplace(key, out.segments.size());
    if (inserted) out.segments.push_back({info.class_id, info.kind, 0});
    ++out.segments[it->second].area;
    out.segment_of_pixel[p] = it->second;
  }
  return out;
}

}  // namespace

double segment_iou(std::span<const PixelIndex> a, std::span<const PixelIndex> b) {
  std::vector<PixelIndex> sa(a.begin(), a.end());
  std::vector<PixelIndex> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  if (sa.empty() && sb.empty()) throw ValidationError("IoU of two empty segments is undefined");
  std::vector<PixelIndex> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(sa.size() + sb.size()) - inter);
}

PanopticScore panoptic_quality(const PseudoMask& pred, const PseudoMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("predicted and ground-truth masks have different shapes");
  }
  pred.validate();
  gt.validate();
  const Segmentation ps = segment(pred);
  const Segmentation gs = segment(gt);

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> overlap;
  for (PixelIndex p = 0; p < pred.target.size(); ++p) {
    ++overlap[{ps.segment_of_pixel[p], gs.segment_of_pixel[p]}];
  }

  std::vector<char> pred_matched(ps.segments.size(), 0);
  std::vector<char> gt_matched(gs.segments.size(), 0);
  std::map<int, double> iou_sum;
  std::map<int, ClassScore> classes;
  for (const auto& seg : gs.segments) classes.try_emplace(seg.class_id, ClassScore{seg.class_id, seg.kind});
  for (const auto& seg : ps.segments) classes.try_emplace(seg.class_id, ClassScore{seg.class_id, seg.kind});

  for (const auto& [key, inter] : overlap) {
    const auto& [pi, gi] = key;
    const Segment& a = ps.segments[pi];
    const Segment& b = gs.segments[gi];
    if (a.class_id != b.class_id) continue;
    const double iou =
        static_cast<double>(inter) / static_cast<double>(a.area + b.area - inter);
    if (iou <= 0.5) continue;
    if (pred_matched[pi] || gt_matched[gi]) {
      throw InvariantViolation("segment matched twice at IoU > 0.5");
    }
    pred_matched[pi] = gt_matched[gi] = 1;
    ++classes[a.class_id].true_positives;
    iou_sum[a.class_id] += iou;
  }
  for (std::size_t k = 0; k < ps.segments.size(); ++k) {
    if (!pred_matched[k]) ++classes[ps.segments[k].class_id].false_positives;
  }
  for (std::size_t k = 0; k < gs.segments.size(); ++k) {
    if (!gt_matched[k]) ++classes[gs.segments[k].class_id].false_negatives;
  }

  PanopticScore score;
  double thing_sum = 0.0;
  double stuff_sum = 0.0;
  int things = 0;
  int stuffs = 0;
  for (auto& [cls, s] : classes) {
    const double tp = s.true_positives;
    const double denom = tp + 0.5 * s.false_positives + 0.5 * s.false_negatives;
    s.sq = s.true_positives > 0 ? iou_sum[cls] / tp : 0.0;
    s.rq = denom > 0.0 ? tp / denom : 0.0;
    s.pq = denom > 0.0 ? iou_sum[cls] / denom : 0.0;
    score.pq += s.pq;
    score.sq += s.sq;
    score.rq += s.rq;
    if (s.kind == TargetKind::thing) {
      thing_sum += s.pq;
      ++things;
    } else {
      stuff_sum += s.pq;
      ++stuffs;
    }
  }
  if (!classes.empty()) {
    const double count = static_cast<double>(classes.size());
    score.pq /= count;
    score.sq /= count;
    score.rq /= count;
  }
  if (things > 0) score.pq_thing = thing_sum / things;
  if (stuffs > 0) score.pq_stuff = stuff_sum / stuffs;
  score.per_class = std::move(classes);
  return score;
}

double mean_target_iou(const PseudoMask& pred, const PseudoMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("predicted and ground-truth masks have different shapes");
  }
  std::map<int, std::size_t> inter;
  std::map<int, std::size_t> gt_area;
  std::map<int, std::size_t> pred_area;
  for (PixelIndex p = 0; p < gt.target.size(); ++p) {
    ++gt_area[gt.target[p]];
    ++pred_area[pred.target[p]];
    if (gt.target[p] == pred.target[p]) ++inter[gt.target[p]];
  }
  if (gt_area.empty()) throw ValidationError("ground-truth mask is empty");
  double sum = 0.0;
  for (const auto& [id, area] : gt_area) {
    const double i = static_cast<double>(inter[id]);
    const double u = static_cast<double>(area + pred_area[id]) - i;
    sum += i / u;
  }
  return sum / static_cast<double>(gt_area.size());
}

}  // namespace otmask
