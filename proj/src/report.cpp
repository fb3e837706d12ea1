#include "boxfuse/report.hpp"

#include <chrono>
#include <cstdio>

#include "boxfuse/format.hpp"
#include "boxfuse/version.hpp"

namespace boxfuse {

namespace {

using njson = nlohmann::ordered_json;

njson optional_number(const std::optional<double>& value) {
  if (!value) return nullptr;
  return round6(*value);
}

}  // namespace

RunReport run_method(const EnsembleData& data, const RunSettings& settings) {
  validate(settings.fusion);

  RunReport report;
  report.settings = settings;

  const auto start = std::chrono::steady_clock::now();
  const FusedMap fused = fuse(data.outputs, data.ground_truth.image_ids(), settings.fusion);
  const auto stop = std::chrono::steady_clock::now();
  report.fuse_seconds = std::chrono::duration<double>(stop - start).count();

  report.eval = evaluate(fused, data.ground_truth);
  const auto samples = match_detections(fused, data.ground_truth, settings.match_iou);
  report.calibration = ece(samples, settings.bins);
  return report;
}

njson fusion_config_json(const FusionConfig& config) {
  njson out;
  out["method"] = to_string(config.method);
  out["iou_threshold"] = round6(config.iou_threshold);
  out["soft_sigma"] = round6(config.soft_sigma);
  out["soft_mode"] = to_string(config.soft_mode);
  out["soft_score_floor"] = round6(config.soft_score_floor);
  out["wbf_skip_threshold"] = round6(config.wbf_skip_threshold);
  out["conf_rescale"] = config.conf_rescale;
  return out;
}

njson config_json(const RunSettings& settings) {
  njson out = fusion_config_json(settings.fusion);
  out["match_iou"] = round6(settings.match_iou);
  out["bins"] = settings.bins;
  return out;
}

njson eval_json(const EvalReport& report) {
  njson out;
  out["ap_50"] = round6(report.ap_50);
  out["ap_95"] = round6(report.ap_95);
  out["ap_coco"] = round6(report.ap_coco);
  out["ar_50"] = round6(report.ar_50);
  out["ar_95"] = round6(report.ar_95);
  out["n_detections"] = report.n_detections;
  out["n_gt"] = report.n_gt;
  njson rows = njson::array();
  for (const CategoryEval& cat : report.per_category) {
    njson row;
    row["category"] = cat.category;
    row["ap_50"] = round6(cat.ap_50);
    row["ap_95"] = round6(cat.ap_95);
    row["ar_50"] = round6(cat.ar_50);
    row["ar_95"] = round6(cat.ar_95);
    row["n_gt"] = cat.n_gt;
    row["n_detections"] = cat.n_detections;
    rows.push_back(std::move(row));
  }
  out["per_category"] = std::move(rows);
  return out;
}

njson calibration_json(const CalibrationReport& report) {
  njson out;
  out["bins"] = report.bins;
  out["n_samples"] = report.n_samples;
  out["ece"] = round6(report.ece);
  njson rows = njson::array();
  for (const ReliabilityRow& r : reliability_data(report)) {
    njson row;
    row["bin_low"] = round6(r.bin_low);
    row["bin_high"] = round6(r.bin_high);
    row["count"] = r.count;
    row["confidence"] = optional_number(r.confidence);
    row["accuracy"] = optional_number(r.accuracy);
    rows.push_back(std::move(row));
  }
  out["reliability"] = std::move(rows);
  return out;
}

std::string report_json(const ReportInputs& inputs, const std::vector<RunReport>& rows) {
  njson doc;
  doc["tool"] = "boxfuse";
  doc["version"] = kVersion;
  njson in;
  in["n_models"] = inputs.n_models;
  in["ground_truth_digest"] = inputs.ground_truth_digest;
  in["model_digests"] = inputs.model_digests;
  doc["inputs"] = std::move(in);
  njson out_rows = njson::array();
  for (const RunReport& row : rows) {
    njson r;
    r["method"] = to_string(row.settings.fusion.method);
    r["config"] = config_json(row.settings);
    r["eval"] = eval_json(row.eval);
    r["calibration"] = calibration_json(row.calibration);
    out_rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(out_rows);
  return doc.dump(2) + "\n";
}

std::string report_table(const std::vector<RunReport>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %9s %9s %9s %9s %9s %8s\n", "aggregation", "AP@0.50",
                "AP@0.95", "AR@0.50", "AR@0.95", "ECE", "fuse_s");
  out += line;
  for (const RunReport& row : rows) {
    std::snprintf(line, sizeof(line), "%-12s %9.6f %9.6f %9.6f %9.6f %9.6f %8.3f\n",
                  to_string(row.settings.fusion.method).c_str(), row.eval.ap_50, row.eval.ap_95,
                  row.eval.ar_50, row.eval.ar_95, row.calibration.ece, row.fuse_seconds);
    out += line;
  }
  return out;
}

}  // namespace boxfuse
