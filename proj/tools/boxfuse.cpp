#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boxfuse/calibration.hpp"
#include "boxfuse/errors.hpp"
#include "boxfuse/eval.hpp"
#include "boxfuse/fusion.hpp"
#include "boxfuse/io.hpp"
#include "boxfuse/report.hpp"
#include "boxfuse/synth.hpp"
#include "boxfuse/version.hpp"

namespace fs = std::filesystem;

namespace {

struct FuseArgs {
  std::string manifest;
  std::string out;
  std::optional<std::string> method;
  std::optional<double> iou_threshold;
  std::optional<double> wbf_skip;
  std::optional<double> soft_sigma;
  std::optional<std::string> soft_mode;
};

struct EvaluateArgs {
  std::string fused;
  std::string ground_truth;
  std::optional<std::string> out;
};

struct CalibrateArgs {
  std::string fused;
  std::string ground_truth;
  int bins = 10;
  double match_iou = 0.5;
  std::optional<std::string> out_report;
  std::optional<std::string> out_csv;
};

struct SynthArgs {
  std::string ground_truth;
  std::string out_dir;
  boxfuse::SynthConfig config;  // flag defaults come straight from the module
};

struct ReportArgs {
  std::string manifest;
  std::string methods = "nms,softnms,wbf";
  std::optional<std::string> out;
};

boxfuse::FusionOverrides cli_overrides(const FuseArgs& args) {
  boxfuse::FusionOverrides overrides;
  if (args.method) overrides.method = boxfuse::parse_fusion_method(*args.method);
  if (args.iou_threshold) overrides.iou_threshold = *args.iou_threshold;
  if (args.wbf_skip) overrides.wbf_skip_threshold = *args.wbf_skip;
  if (args.soft_sigma) overrides.soft_sigma = *args.soft_sigma;
  if (args.soft_mode) overrides.soft_mode = boxfuse::parse_soft_mode(*args.soft_mode);
  return overrides;
}


void write_or_print(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out) throw boxfuse::IoError("cannot open file for writing: " + *path);
  out << text;
  if (!out) throw boxfuse::IoError("failed while writing: " + *path);
}

int run_fuse(const FuseArgs& args) {
  const auto manifest = boxfuse::load_manifest(args.manifest);
  boxfuse::FusionConfig config = boxfuse::apply(boxfuse::FusionConfig{}, manifest.fusion);
  config = boxfuse::apply(config, cli_overrides(args));
  boxfuse::validate(config);

  const auto data = boxfuse::load_ensemble(manifest);
  const auto start = std::chrono::steady_clock::now();
  const auto fused = boxfuse::fuse(data.outputs, data.ground_truth.image_ids(), config);
  const auto stop = std::chrono::steady_clock::now();
  boxfuse::write_fused(args.out, fused);

  std::size_t n_boxes = 0;
  for (const auto& [image_id, dets] : fused) n_boxes += dets.size();
  std::cout << "config " << boxfuse::fusion_config_json(config).dump() << "\n";
  std::cout << "fused " << fused.size() << " images into " << n_boxes << " boxes in "
            << std::chrono::duration<double>(stop - start).count() << " s -> " << args.out
            << "\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  const auto fused = boxfuse::load_fused(args.fused);
  const auto gt = boxfuse::load_ground_truth(args.ground_truth);
  const auto report = boxfuse::evaluate(fused, gt);
  write_or_print(args.out, boxfuse::eval_json(report).dump(2) + "\n");
  return 0;
}

int run_calibrate(const CalibrateArgs& args) {
  const auto fused = boxfuse::load_fused(args.fused);
  const auto gt = boxfuse::load_ground_truth(args.ground_truth);
  const auto samples = boxfuse::match_detections(fused, gt, args.match_iou);
  const auto report = boxfuse::ece(samples, args.bins);
  write_or_print(args.out_report, boxfuse::calibration_json(report).dump(2) + "\n");
  if (args.out_csv) {
    std::ostringstream csv;
    boxfuse::write_reliability_csv(csv, boxfuse::reliability_data(report));
    write_or_print(args.out_csv, csv.str());
  }
  return 0;
}

int run_synth(const SynthArgs& args) {
  const auto gt = boxfuse::load_ground_truth(args.ground_truth);
  const auto outputs = boxfuse::generate(gt, args.config);

  const fs::path out_dir(args.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw boxfuse::IoError("cannot create output directory: " + out_dir.string());

  boxfuse::EnsembleManifest manifest;
  // Keep the manifest portable: reference the ground truth relative to the
  // manifest's own directory when possible.
  const fs::path rel = fs::relative(fs::absolute(args.ground_truth), fs::absolute(out_dir), ec);
  manifest.ground_truth = (ec || rel.empty()) ? fs::path(args.ground_truth) : rel;
  for (const auto& stream : outputs.streams) {
    const std::string name = "model_" + std::to_string(stream.model_id) + ".json";
    boxfuse::write_detections(out_dir / name, stream);
    manifest.models.push_back({stream.model_id, name});
  }
  boxfuse::write_manifest(out_dir / "manifest.json", manifest);
  std::cout << "wrote " << outputs.streams.size() << " detection streams and manifest.json to "
            << out_dir.string() << "\n";
  return 0;
}

int run_report(const ReportArgs& args) {
  const auto manifest = boxfuse::load_manifest(args.manifest);
  std::vector<boxfuse::FusionMethod> methods;
  std::stringstream names(args.methods);
  std::string name;
  while (std::getline(names, name, ','))
    if (!name.empty()) methods.push_back(boxfuse::parse_fusion_method(name));
  if (methods.empty()) throw boxfuse::ConfigError("no fusion methods requested");

  const auto data = boxfuse::load_ensemble(manifest);
  boxfuse::ReportInputs inputs;
  inputs.n_models = manifest.n_models();
  inputs.ground_truth_digest = boxfuse::file_digest(manifest.ground_truth);
  for (const auto& model : manifest.models)
    inputs.model_digests.push_back(boxfuse::file_digest(model.path));

  std::vector<boxfuse::RunReport> rows;
  for (const auto method : methods) {
    boxfuse::RunSettings settings;
    settings.fusion = boxfuse::apply(boxfuse::FusionConfig{}, manifest.fusion);
    settings.fusion.method = method;
    rows.push_back(boxfuse::run_method(data, settings));
  }

  std::cout << boxfuse::report_table(rows);
  if (args.out) {
    std::ofstream out(*args.out, std::ios::binary | std::ios::trunc);
    if (!out) throw boxfuse::IoError("cannot open file for writing: " + *args.out);
    out << boxfuse::report_json(inputs, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection-ensemble fusion, calibration and COCO-style evaluation"};
  app.set_version_flag("--version", boxfuse::kVersion);
  app.require_subcommand(1);

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse an ensemble manifest into one detection file");
  fuse_cmd->add_option("manifest", fuse_args.manifest, "Ensemble manifest JSON")->required();
  fuse_cmd->add_option("--out", fuse_args.out, "Output fused detections JSON")->required();
  fuse_cmd->add_option("--method", fuse_args.method, "Fusion method: nms, softnms or wbf");
  fuse_cmd->add_option("--iou-thresh", fuse_args.iou_threshold, "IoU threshold (default 0.5)");
  fuse_cmd->add_option("--wbf-skip", fuse_args.wbf_skip,
                       "WBF score elimination threshold (default 0.2)");
  fuse_cmd->add_option("--soft-sigma", fuse_args.soft_sigma,
                       "Soft-NMS gaussian sigma (default 0.5)");
  fuse_cmd->add_option("--soft-mode", fuse_args.soft_mode, "Soft-NMS mode: linear or gaussian");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "AP/AR of a fused file against ground truth");
  eval_cmd->add_option("fused", eval_args.fused, "Fused detections JSON")->required();
  eval_cmd->add_option("ground_truth", eval_args.ground_truth, "Ground truth JSON")->required();
  eval_cmd->add_option("--out", eval_args.out, "Report JSON path (stdout when omitted)");

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand("calibrate", "ECE and reliability data of a fused file");
  cal_cmd->add_option("fused", cal_args.fused, "Fused detections JSON")->required();
  cal_cmd->add_option("ground_truth", cal_args.ground_truth, "Ground truth JSON")->required();
  cal_cmd->add_option("--bins", cal_args.bins, "Number of confidence bins")
      ->default_val(10);
  cal_cmd->add_option("--match-iou", cal_args.match_iou, "Matching IoU threshold")
      ->default_val(0.5);
  cal_cmd->add_option("--out-report", cal_args.out_report,
                      "Calibration report JSON path (stdout when omitted)");
  cal_cmd->add_option("--out-reliability-csv", cal_args.out_csv, "Reliability CSV path");

  SynthArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic detector ensemble from ground truth");
  synth_cmd->add_option("ground_truth", synth_args.ground_truth, "Ground truth JSON")->required();
  synth_cmd->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  synth_cmd->add_option("--models", synth_args.config.n_models, "Number of simulated models")
      ->default_val(synth_args.config.n_models);
  synth_cmd->add_option("--seed", synth_args.config.seed, "Master seed")
      ->default_val(synth_args.config.seed);
  synth_cmd->add_option("--sigma", synth_args.config.coord_noise_sigma,
                        "Corner jitter sigma in pixels")
      ->default_val(synth_args.config.coord_noise_sigma);
  synth_cmd->add_option("--gamma", synth_args.config.miscalibration_exponent,
                        "Miscalibration exponent")
      ->default_val(synth_args.config.miscalibration_exponent);

  ReportArgs report_args;
  auto* report_cmd =
      app.add_subcommand("report", "Fuse, evaluate and calibrate several methods side by side");
  report_cmd->add_option("manifest", report_args.manifest, "Ensemble manifest JSON")->required();
  report_cmd->add_option("--methods", report_args.methods, "Comma-separated fusion methods")
      ->default_val(report_args.methods);
  report_cmd->add_option("--out", report_args.out, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return 2;
  }

  try {
    if (fuse_cmd->parsed()) return run_fuse(fuse_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (cal_cmd->parsed()) return run_calibrate(cal_args);
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (report_cmd->parsed()) return run_report(report_args);
  } catch (const boxfuse::Error& e) {
    std::cerr << e.category_label() << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
