#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "boxfuse/calibration.hpp"
#include "boxfuse/eval.hpp"
#include "boxfuse/fusion.hpp"
#include "boxfuse/io.hpp"

namespace boxfuse {

struct RunSettings {
  FusionConfig fusion;
  double match_iou = 0.5;
  int bins = 10;
};

// One fused-method row of the comparison report. Wall-clock time is printed
// on stdout only; the persisted JSON must stay byte-identical across reruns.
struct RunReport {
  RunSettings settings;
  EvalReport eval;
  CalibrationReport calibration;
  double fuse_seconds = 0.0;
};

struct ReportInputs {
  std::string ground_truth_digest;
  std::vector<std::string> model_digests;
  int n_models = 0;
};

// Fuse + evaluate + calibrate one method over loaded ensemble data.
RunReport run_method(const EnsembleData& data, const RunSettings& settings);

nlohmann::ordered_json fusion_config_json(const FusionConfig& config);
nlohmann::ordered_json config_json(const RunSettings& settings);
nlohmann::ordered_json eval_json(const EvalReport& report);
nlohmann::ordered_json calibration_json(const CalibrationReport& report);

// Deterministic JSON document: stable key order, no timing fields.
std::string report_json(const ReportInputs& inputs, const std::vector<RunReport>& rows);

// Aligned text table (aggregation, AP, AR, ECE, fuse time).
std::string report_table(const std::vector<RunReport>& rows);

}  // namespace boxfuse
