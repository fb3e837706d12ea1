#include "boxfuse/calibration.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <ostream>

#include "boxfuse/errors.hpp"
#include "boxfuse/format.hpp"

namespace boxfuse {

int bin_index(double confidence, int bins) {
  if (confidence <= 0.0) return 1;
  const int m = static_cast<int>(std::ceil(confidence * bins));
  return std::clamp(m, 1, bins);
}

double bin_confidence(const CalibrationBin& bin) {
  assert(!bin.members.empty());
  double sum = 0.0;
  for (const CalibratedSample& s : bin.members) sum += s.confidence;
  return sum / static_cast<double>(bin.members.size());
}

double bin_accuracy(const CalibrationBin& bin) {
  assert(!bin.members.empty());
  std::int64_t correct = 0;
  for (const CalibratedSample& s : bin.members) correct += s.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(bin.members.size());
}

std::vector<CalibratedSample> match_detections(const FusedMap& fused, const GroundTruth& gt,
                                               double match_iou) {
  std::vector<CalibratedSample> samples;
  const std::vector<GtBox> no_boxes;

  for (const auto& [image_id, dets] : fused) {
    const auto git = gt.by_image.find(image_id);
    const std::vector<GtBox>& gt_boxes = git == gt.by_image.end() ? no_boxes : git->second;
    std::vector<char> claimed(gt_boxes.size(), 0);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&dets](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });

    for (std::size_t i : order) {
      const FusedDetection& det = dets[i];
      double best_iou = 0.0;
      std::size_t best = gt_boxes.size();
      for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
        if (claimed[j] || gt_boxes[j].category != det.category) continue;
        const double u = iou(det.box, gt_boxes[j].box);
        if (u > best_iou) {
          best_iou = u;
          best = j;
        }
      }
      const bool correct = best < gt_boxes.size() && best_iou >= match_iou;
      if (correct) claimed[best] = 1;
      samples.push_back({det.score, correct});
    }
  }
  return samples;
}

CalibrationReport ece(const std::vector<CalibratedSample>& samples, int bins) {
  if (bins < 1) throw ConfigError("bin count must be at least 1, got " + std::to_string(bins));
  if (samples.empty()) throw DataError("cannot compute ECE from an empty sample set");

  std::vector<CalibrationBin> bin_list(static_cast<std::size_t>(bins));
  for (int m = 1; m <= bins; ++m) bin_list[static_cast<std::size_t>(m - 1)].index = m;
  for (const CalibratedSample& s : samples)
    bin_list[static_cast<std::size_t>(bin_index(s.confidence, bins) - 1)].members.push_back(s);

  CalibrationReport report;
  report.bins = bins;
  report.n_samples = static_cast<std::int64_t>(samples.size());
  report.per_bin.resize(static_cast<std::size_t>(bins));

  const double n = static_cast<double>(samples.size());
  double total = 0.0;
  for (int m = 0; m < bins; ++m) {
    const CalibrationBin& bin = bin_list[static_cast<std::size_t>(m)];
    CalibrationBinStats& stats = report.per_bin[static_cast<std::size_t>(m)];
    stats.count = static_cast<std::int64_t>(bin.members.size());
    if (bin.members.empty()) continue;  // zero weight, stats stay absent
    const double conf = bin_confidence(bin);
    const double acc = bin_accuracy(bin);
    stats.confidence = conf;
    stats.accuracy = acc;
    total += (static_cast<double>(stats.count) / n) * std::abs(acc - conf);
  }
  report.ece = total;
  return report;
}

std::vector<ReliabilityRow> reliability_data(const CalibrationReport& report) {
  std::vector<ReliabilityRow> rows;
  rows.reserve(static_cast<std::size_t>(report.bins));
  for (int m = 1; m <= report.bins; ++m) {
    const CalibrationBinStats& stats = report.per_bin[static_cast<std::size_t>(m - 1)];
    ReliabilityRow row;
    row.bin_low = static_cast<double>(m - 1) / static_cast<double>(report.bins);
    row.bin_high = static_cast<double>(m) / static_cast<double>(report.bins);
    row.count = stats.count;
    row.confidence = stats.confidence;
    row.accuracy = stats.accuracy;
    rows.push_back(row);
  }
  return rows;
}

void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows) {
  out << "bin_low,bin_high,count,confidence,accuracy\n";
  for (const ReliabilityRow& row : rows) {
    out << format_number(row.bin_low) << ',' << format_number(row.bin_high) << ',' << row.count
        << ',';
    if (row.confidence) out << format_number(*row.confidence);
    out << ',';
    if (row.accuracy) out << format_number(*row.accuracy);
    out << '\n';
  }
}

}  // namespace boxfuse
