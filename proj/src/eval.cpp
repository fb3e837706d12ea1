#include "boxfuse/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "boxfuse/errors.hpp"

namespace boxfuse {

namespace {

struct RankedDet {
  double score = 0.0;
  ImageId image_id = 0;
  std::size_t index_in_image = 0;
  const FusedDetection* det = nullptr;
};

// Detections of one category across all images, sorted by (score desc,
// image_id asc, per-image position asc). When max_dets is set, only the
// max_dets highest-score detections of each image compete at all.
std::vector<RankedDet> ranked_category_dets(const FusedMap& dets, int category,
                                            std::optional<std::int64_t> max_dets) {
  std::vector<RankedDet> ranked;
  for (const auto& [image_id, image_dets] : dets) {
    std::vector<std::size_t> order(image_dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return image_dets[a].score > image_dets[b].score;
    });
    std::size_t limit = order.size();
    if (max_dets && *max_dets >= 0)
      limit = std::min<std::size_t>(limit, static_cast<std::size_t>(*max_dets));
    for (std::size_t k = 0; k < limit; ++k) {
      const std::size_t idx = order[k];
      if (image_dets[idx].category != category) continue;
      ranked.push_back({image_dets[idx].score, image_id, idx, &image_dets[idx]});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedDet& a, const RankedDet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.index_in_image < b.index_in_image;
  });
  return ranked;
}

// Greedy matching in rank order: true-positive flags per ranked detection.
std::vector<char> greedy_match(const std::vector<RankedDet>& ranked, const GroundTruth& gt,
                               int category, double iou_threshold) {
  std::map<ImageId, std::vector<char>> claimed;
  std::vector<char> tp(ranked.size(), 0);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const RankedDet& r = ranked[k];
    const auto git = gt.by_image.find(r.image_id);
    if (git == gt.by_image.end()) continue;
    const std::vector<GtBox>& gt_boxes = git->second;
    std::vector<char>& used = claimed[r.image_id];
    used.resize(gt_boxes.size(), 0);
    double best_iou = 0.0;
    std::size_t best = gt_boxes.size();
    for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
      if (used[j] || gt_boxes[j].category != category) continue;
      const double u = iou(r.det->box, gt_boxes[j].box);
      if (u > best_iou) {
        best_iou = u;
        best = j;
      }
    }
    if (best < gt_boxes.size() && best_iou >= iou_threshold) {
      used[best] = 1;
      tp[k] = 1;
    }
  }
  return tp;
}

std::int64_t category_gt_count(const GroundTruth& gt, int category) {
  std::int64_t n = 0;
  for (const auto& [image_id, boxes] : gt.by_image)
    for (const GtBox& b : boxes)
      if (b.category == category) ++n;
  return n;
}

// Categories with at least one ground-truth box, ascending.
std::vector<int> gt_categories(const GroundTruth& gt) {
  std::set<int> cats;
  for (const auto& [image_id, boxes] : gt.by_image)
    for (const GtBox& b : boxes) cats.insert(b.category);
  return {cats.begin(), cats.end()};
}

double category_ap(const FusedMap& dets, const GroundTruth& gt, int category,
                   double iou_threshold) {
  const std::int64_t n_gt = category_gt_count(gt, category);
  const auto ranked = ranked_category_dets(dets, category, std::nullopt);
  const auto tp = greedy_match(ranked, gt, category, iou_threshold);

  std::vector<double> precision(ranked.size());
  std::vector<double> recall(ranked.size());
  std::int64_t tp_cum = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    tp_cum += tp[k];
    precision[k] = static_cast<double>(tp_cum) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp_cum) / static_cast<double>(n_gt);
  }

  // Precision envelope: monotonically non-increasing from the right.
  for (std::size_t k = precision.size(); k-- > 1;)
    precision[k - 1] = std::max(precision[k - 1], precision[k]);

  // Sample at recall thresholds 0.00, 0.01, ..., 1.00. Recall is
  // non-decreasing, so the first rank reaching the threshold carries the
  // interpolated (max-to-the-right) precision.
  double sum = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    while (k < recall.size() && recall[k] < r) ++k;
    if (k < recall.size()) sum += precision[k];
  }
  return sum / 101.0;
}

double category_recall(const FusedMap& dets, const GroundTruth& gt, int category,
                       double iou_threshold, std::optional<std::int64_t> max_dets) {
  const std::int64_t n_gt = category_gt_count(gt, category);
  const auto ranked = ranked_category_dets(dets, category, max_dets);
  const auto tp = greedy_match(ranked, gt, category, iou_threshold);
  const std::int64_t matched = std::count(tp.begin(), tp.end(), 1);
  return static_cast<double>(matched) / static_cast<double>(n_gt);
}

std::vector<int> require_categories(const GroundTruth& gt) {
  std::vector<int> cats = gt_categories(gt);
  if (cats.empty()) throw DataError("ground truth contains no boxes; AP/AR are undefined");
  return cats;
}

}  // namespace

double ap_at_iou(const FusedMap& dets, const GroundTruth& gt, double iou_threshold) {
  const std::vector<int> cats = require_categories(gt);
  double sum = 0.0;
  for (int c : cats) sum += category_ap(dets, gt, c, iou_threshold);
  return sum / static_cast<double>(cats.size());
}

double ar_at_iou(const FusedMap& dets, const GroundTruth& gt, double iou_threshold,
                 std::optional<std::int64_t> max_dets) {
  const std::vector<int> cats = require_categories(gt);
  double sum = 0.0;
  for (int c : cats) sum += category_recall(dets, gt, c, iou_threshold, max_dets);
  return sum / static_cast<double>(cats.size());
}

EvalReport evaluate(const FusedMap& dets, const GroundTruth& gt) {
  const std::vector<int> cats = require_categories(gt);

  EvalReport report;
  std::map<int, std::int64_t> det_counts;
  for (const auto& [image_id, image_dets] : dets) {
    report.n_detections += static_cast<std::int64_t>(image_dets.size());
    for (const FusedDetection& d : image_dets) ++det_counts[d.category];
  }
  report.n_gt = gt.total_boxes();

  double ap50 = 0.0, ap95 = 0.0, ar50 = 0.0, ar95 = 0.0;
  for (int c : cats) {
    CategoryEval row;
    row.category = c;
    row.ap_50 = category_ap(dets, gt, c, 0.50);
    row.ap_95 = category_ap(dets, gt, c, 0.95);
    row.ar_50 = category_recall(dets, gt, c, 0.50, std::nullopt);
    row.ar_95 = category_recall(dets, gt, c, 0.95, std::nullopt);
    row.n_gt = category_gt_count(gt, c);
    const auto it = det_counts.find(c);
    row.n_detections = it == det_counts.end() ? 0 : it->second;
    ap50 += row.ap_50;
    ap95 += row.ap_95;
    ar50 += row.ar_50;
    ar95 += row.ar_95;
    report.per_category.push_back(row);
  }
  const double n_cats = static_cast<double>(cats.size());
  report.ap_50 = ap50 / n_cats;
  report.ap_95 = ap95 / n_cats;
  report.ar_50 = ar50 / n_cats;
  report.ar_95 = ar95 / n_cats;

  double coco = 0.0;
  for (int step = 0; step < 10; ++step) {
    const double t = 0.50 + 0.05 * static_cast<double>(step);
    double sum = 0.0;
    for (int c : cats) sum += category_ap(dets, gt, c, t);
    coco += sum / n_cats;
  }
  report.ap_coco = coco / 10.0;
  return report;
}

}  // namespace boxfuse
