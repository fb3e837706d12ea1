#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "boxfuse/detection.hpp"

namespace boxfuse {

// One prediction reduced to (confidence, matched-a-ground-truth-box).
struct CalibratedSample {
  double confidence = 0.0;
  bool correct = false;
};

// Samples whose confidence falls in ((index-1)/M, index/M]; bin 1 also admits
// confidence exactly 0.
struct CalibrationBin {
  int index = 1;  // 1..M
  std::vector<CalibratedSample> members;
};

struct CalibrationBinStats {
  std::int64_t count = 0;
  std::optional<double> confidence;  // absent for empty bins
  std::optional<double> accuracy;
};

struct CalibrationReport {
  int bins = 0;
  std::int64_t n_samples = 0;
  std::vector<CalibrationBinStats> per_bin;  // size == bins
  double ece = 0.0;
};

struct ReliabilityRow {
  double bin_low = 0.0;
  double bin_high = 0.0;
  std::int64_t count = 0;
  std::optional<double> confidence;
  std::optional<double> accuracy;
};

// 1-based index of the equal-width bin holding `confidence`.
int bin_index(double confidence, int bins);

// Averages over a nonempty bin.
double bin_confidence(const CalibrationBin& bin);
double bin_accuracy(const CalibrationBin& bin);

// Greedy class-aware matching of fused detections against ground truth: per
// image, detections in score-descending order claim the unmatched same
// category box with highest IoU, and count as correct when that IoU reaches
// match_iou. Every detection yields exactly one sample; every ground-truth
// box matches at most once.
std::vector<CalibratedSample> match_detections(const FusedMap& fused, const GroundTruth& gt,
                                               double match_iou = 0.5);

// Expected calibration error over `bins` equal-width bins; empty bins carry
// zero weight. Throws DataError when `samples` is empty.
CalibrationReport ece(const std::vector<CalibratedSample>& samples, int bins = 10);

// One row per bin, empty bins included with absent stats.
std::vector<ReliabilityRow> reliability_data(const CalibrationReport& report);

void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows);

}  // namespace boxfuse
