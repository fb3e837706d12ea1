#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "boxfuse/detection.hpp"

namespace boxfuse {

struct CategoryEval {
  int category = 0;
  double ap_50 = 0.0;
  double ap_95 = 0.0;
  double ar_50 = 0.0;
  double ar_95 = 0.0;
  std::int64_t n_gt = 0;
  std::int64_t n_detections = 0;
};

struct EvalReport {
  double ap_50 = 0.0;
  double ap_95 = 0.0;
  double ar_50 = 0.0;
  double ar_95 = 0.0;
  double ap_coco = 0.0;  // mean AP over IoU 0.50:0.05:0.95, informational
  std::vector<CategoryEval> per_category;
  std::int64_t n_detections = 0;
  std::int64_t n_gt = 0;
};

// 101-point interpolated average precision at one IoU threshold, averaged over
// categories present in the ground truth. Detections are globally score-ranked
// per category and greedily matched to the best unmatched same-category box of
// their image; a match requires IoU >= iou_threshold. Throws DataError when
// the ground truth contains no boxes.
double ap_at_iou(const FusedMap& dets, const GroundTruth& gt, double iou_threshold);

// Mean per-category recall, using up to max_dets highest-score detections per
// image (unlimited by default).
double ar_at_iou(const FusedMap& dets, const GroundTruth& gt, double iou_threshold,
                 std::optional<std::int64_t> max_dets = std::nullopt);

EvalReport evaluate(const FusedMap& dets, const GroundTruth& gt);

}  // namespace boxfuse
