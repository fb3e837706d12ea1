#include <doctest.h>

#include <fstream>
#include <string>

#include <json.hpp>

#include "boxfuse/fusion.hpp"
#include "support/subprocess.hpp"

using boxfuse::testing::RunResult;
using boxfuse::testing::TempDir;
using boxfuse::testing::run_process;
using njson = nlohmann::json;

namespace {

const std::string kCli = BOXFUSE_CLI_PATH;

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// Two images, two annotated boxes each.
void write_small_gt(const std::filesystem::path& path) {
  write_file(path, R"({
    "images": [{"id": 1, "width": 200, "height": 200}, {"id": 2, "width": 200, "height": 200}],
    "annotations": [
      {"id": 1, "image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40]},
      {"id": 2, "image_id": 1, "category_id": 1, "bbox": [100, 100, 50, 50]},
      {"id": 3, "image_id": 2, "category_id": 1, "bbox": [20, 30, 60, 40]},
      {"id": 4, "image_id": 2, "category_id": 1, "bbox": [120, 20, 30, 60]}
    ],
    "categories": [{"id": 1, "name": "object"}]
  })");
}

void write_exact_detections(const std::filesystem::path& gt_like, const std::filesystem::path& out) {
  (void)gt_like;
  write_file(out, R"([
    {"image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40], "score": 0.95},
    {"image_id": 1, "category_id": 1, "bbox": [100, 100, 50, 50], "score": 0.9},
    {"image_id": 2, "category_id": 1, "bbox": [20, 30, 60, 40], "score": 0.85},
    {"image_id": 2, "category_id": 1, "bbox": [120, 20, 30, 60], "score": 0.8}
  ])");
}

void write_manifest_file(const std::filesystem::path& path, int n_models) {
  std::string models;
  for (int m = 0; m < n_models; ++m) {
    if (m) models += ", ";
    models += R"({"id": )" + std::to_string(m) + R"(, "path": "model_)" + std::to_string(m) +
              R"(.json"})";
  }
  write_file(path, R"({"ground_truth": "gt.json", "models": [)" + models + "]}");
}

}  // namespace

TEST_CASE("fuse writes a fused file and echoes the config") {
  TempDir dir("cli_fuse");
  write_small_gt(dir.path() / "gt.json");
  write_exact_detections(dir.path() / "gt.json", dir.path() / "model_0.json");
  write_exact_detections(dir.path() / "gt.json", dir.path() / "model_1.json");
  write_manifest_file(dir.path() / "manifest.json", 2);

  const RunResult result = run_process(
      {kCli, "fuse", "manifest.json", "--method", "wbf", "--out", "fused.json"}, dir.path());
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("\"method\":\"wbf\"") != std::string::npos);
  CHECK(result.out.find("\"wbf_skip_threshold\":0.2") != std::string::npos);

  const njson fused = njson::parse(boxfuse::testing::read_file(dir.path() / "fused.json"));
  REQUIRE(fused.is_array());
  CHECK(fused.size() == 4);  // identical boxes merged across the two models
  for (const auto& rec : fused) {
    CHECK(rec.contains("variance"));
    CHECK(rec.at("cluster_size") == 2);
  }
}

TEST_CASE("fuse with default method echoes the 0.5 threshold") {
  TempDir dir("cli_fuse_default");
  write_small_gt(dir.path() / "gt.json");
  write_exact_detections(dir.path() / "gt.json", dir.path() / "model_0.json");
  write_manifest_file(dir.path() / "manifest.json", 1);

  const RunResult result =
      run_process({kCli, "fuse", "manifest.json", "--method", "nms", "--out", "fused.json"},
                  dir.path());
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("\"iou_threshold\":0.5") != std::string::npos);
}

TEST_CASE("help and version exit cleanly") {
  CHECK(run_process({kCli, "--help"}).exit_code == 0);
  CHECK(run_process({kCli, "--version"}).exit_code == 0);
  CHECK(run_process({kCli, "fuse", "--help"}).exit_code == 0);
  // No subcommand is a usage error.
  CHECK(run_process({kCli}).exit_code == 2);
}

TEST_CASE("unknown method exits with the config code") {
  TempDir dir("cli_badmethod");
  write_small_gt(dir.path() / "gt.json");
  write_exact_detections(dir.path() / "gt.json", dir.path() / "model_0.json");
  write_manifest_file(dir.path() / "manifest.json", 1);

  const RunResult result = run_process(
      {kCli, "fuse", "manifest.json", "--method", "bogus", "--out", "fused.json"}, dir.path());
  CHECK(result.exit_code == 2);
  CHECK(result.err.rfind("config:", 0) == 0);
}

TEST_CASE("missing manifest exits with the io code") {
  TempDir dir("cli_missing");
  const RunResult result =
      run_process({kCli, "fuse", "absent.json", "--out", "fused.json"}, dir.path());
  CHECK(result.exit_code == 4);
  CHECK(result.err.rfind("io:", 0) == 0);
}

TEST_CASE("invalid detection data exits with the data code") {
  TempDir dir("cli_baddata");
  write_small_gt(dir.path() / "gt.json");
  write_file(dir.path() / "model_0.json",
             R"([{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1], "score": 1.5}])");
  write_manifest_file(dir.path() / "manifest.json", 1);

  const RunResult result =
      run_process({kCli, "fuse", "manifest.json", "--out", "fused.json"}, dir.path());
  CHECK(result.exit_code == 3);
  CHECK(result.err.rfind("data:", 0) == 0);
}

TEST_CASE("evaluate reports perfect metrics for exact detections") {
  TempDir dir("cli_eval");
  write_small_gt(dir.path() / "gt.json");
  write_exact_detections(dir.path() / "gt.json", dir.path() / "dets.json");

  const RunResult result = run_process(
      {kCli, "evaluate", "dets.json", "gt.json", "--out", "eval.json"}, dir.path());
  REQUIRE(result.exit_code == 0);
  const njson report = njson::parse(boxfuse::testing::read_file(dir.path() / "eval.json"));
  CHECK(report.at("ap_50").get<double>() == 1.0);
  CHECK(report.at("ap_95").get<double>() == 1.0);
  CHECK(report.at("ar_50").get<double>() == 1.0);
  CHECK(report.at("n_gt") == 4);

  // Empty detections: all metrics zero.
  write_file(dir.path() / "empty.json", "[]");
  const RunResult empty = run_process(
      {kCli, "evaluate", "empty.json", "gt.json", "--out", "eval2.json"}, dir.path());
  REQUIRE(empty.exit_code == 0);
  const njson report2 = njson::parse(boxfuse::testing::read_file(dir.path() / "eval2.json"));
  CHECK(report2.at("ap_50").get<double>() == 0.0);
  CHECK(report2.at("ar_95").get<double>() == 0.0);
}

TEST_CASE("calibrate writes a report and a csv with one row per bin") {
  TempDir dir("cli_cal");
  write_small_gt(dir.path() / "gt.json");
  write_file(dir.path() / "dets.json", R"([
    {"image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40], "score": 1.0},
    {"image_id": 1, "category_id": 1, "bbox": [100, 100, 50, 50], "score": 1.0},
    {"image_id": 2, "category_id": 1, "bbox": [20, 30, 60, 40], "score": 1.0},
    {"image_id": 2, "category_id": 1, "bbox": [120, 20, 30, 60], "score": 1.0}
  ])");

  const RunResult result =
      run_process({kCli, "calibrate", "dets.json", "gt.json", "--bins", "10", "--out-report",
                   "cal.json", "--out-reliability-csv", "rel.csv"},
                  dir.path());
  REQUIRE(result.exit_code == 0);

  const njson report = njson::parse(boxfuse::testing::read_file(dir.path() / "cal.json"));
  CHECK(report.at("ece").get<double>() == 0.0);  // confidence 1.0, all correct
  CHECK(report.at("n_samples") == 4);
  CHECK(report.at("reliability").size() == 10);

  const std::string csv = boxfuse::testing::read_file(dir.path() / "rel.csv");
  CHECK(csv.rfind("bin_low,bin_high,count,confidence,accuracy\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 11);

  // A stricter matching IoU turns the slightly-off boxes into misses.
  write_file(dir.path() / "near.json", R"([
    {"image_id": 1, "category_id": 1, "bbox": [12, 12, 40, 40], "score": 1.0}
  ])");
  const RunResult strict =
      run_process({kCli, "calibrate", "near.json", "gt.json", "--match-iou", "0.99",
                   "--out-report", "strict.json"},
                  dir.path());
  REQUIRE(strict.exit_code == 0);
  const njson strict_report = njson::parse(boxfuse::testing::read_file(dir.path() / "strict.json"));
  CHECK(strict_report.at("ece").get<double>() == 1.0);  // confident and wrong
}

TEST_CASE("synth writes streams plus manifest, deterministically") {
  TempDir dir("cli_synth");
  write_small_gt(dir.path() / "gt.json");

  const std::vector<std::string> cmd = {kCli,   "synth",     "gt.json", "--out-dir", "synth",
                                        "--models", "3",     "--seed",  "42"};
  REQUIRE(run_process(cmd, dir.path()).exit_code == 0);
  const std::string manifest = boxfuse::testing::read_file(dir.path() / "synth/manifest.json");
  const njson parsed = njson::parse(manifest);
  CHECK(parsed.at("models").size() == 3);
  for (int m = 0; m < 3; ++m)
    CHECK(std::filesystem::exists(dir.path() / ("synth/model_" + std::to_string(m) + ".json")));

  const std::string model0 = boxfuse::testing::read_file(dir.path() / "synth/model_0.json");
  REQUIRE(run_process(cmd, dir.path()).exit_code == 0);
  CHECK(boxfuse::testing::read_file(dir.path() / "synth/model_0.json") == model0);
  CHECK(boxfuse::testing::read_file(dir.path() / "synth/manifest.json") == manifest);
}

TEST_CASE("noiseless synth evaluates to a perfect detector through the cli") {
  TempDir dir("cli_synth_perfect");
  write_small_gt(dir.path() / "gt.json");

  REQUIRE(run_process({kCli, "synth", "gt.json", "--out-dir", "synth", "--models", "2", "--sigma",
                       "0", "--gamma", "1"},
                      dir.path())
              .exit_code == 0);
  REQUIRE(run_process({kCli, "fuse", "synth/manifest.json", "--method", "nms", "--out",
                       "fused.json"},
                      dir.path())
              .exit_code == 0);
  const RunResult eval = run_process(
      {kCli, "evaluate", "fused.json", "gt.json", "--out", "eval.json"}, dir.path());
  REQUIRE(eval.exit_code == 0);
  const njson report = njson::parse(boxfuse::testing::read_file(dir.path() / "eval.json"));
  CHECK(report.at("ap_50").get<double>() == 1.0);
}

TEST_CASE("report renders one row per method and identical bytes across runs") {
  TempDir dir("cli_report");
  write_small_gt(dir.path() / "gt.json");
  REQUIRE(run_process({kCli, "synth", "gt.json", "--out-dir", ".", "--models", "2", "--seed",
                       "11"},
                      dir.path())
              .exit_code == 0);

  const std::vector<std::string> cmd = {kCli, "report", "manifest.json", "--methods",
                                        "nms,softnms,wbf", "--out", "report.json"};
  const RunResult first = run_process(cmd, dir.path());
  REQUIRE(first.exit_code == 0);
  const std::string report1 = boxfuse::testing::read_file(dir.path() / "report.json");
  const njson parsed = njson::parse(report1);
  REQUIRE(parsed.at("rows").size() == 3);
  CHECK(parsed.at("rows")[0].at("method") == "nms");
  CHECK(parsed.at("rows")[1].at("method") == "softnms");
  CHECK(parsed.at("rows")[2].at("method") == "wbf");

  // The echoed config equals the module defaults, field by field.
  const boxfuse::FusionConfig defaults;
  for (const auto& row : parsed.at("rows")) {
    const auto& config = row.at("config");
    CHECK(config.at("iou_threshold").get<double>() == defaults.iou_threshold);
    CHECK(config.at("soft_sigma").get<double>() == defaults.soft_sigma);
    CHECK(config.at("soft_mode") == boxfuse::to_string(defaults.soft_mode));
    CHECK(config.at("soft_score_floor").get<double>() == defaults.soft_score_floor);
    CHECK(config.at("wbf_skip_threshold").get<double>() == defaults.wbf_skip_threshold);
    CHECK(config.at("conf_rescale").get<bool>() == defaults.conf_rescale);
    // Every method row carries its own calibration result.
    CHECK(row.at("calibration").at("ece").is_number());
    CHECK(row.at("calibration").at("ece").get<double>() >= 0.0);
  }

  // The text table has a header plus one line per method.
  std::size_t lines = 0;
  for (char c : first.out) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 4);

  const RunResult second = run_process(cmd, dir.path());
  REQUIRE(second.exit_code == 0);
  CHECK(boxfuse::testing::read_file(dir.path() / "report.json") == report1);

  const RunResult bad = run_process(
      {kCli, "report", "manifest.json", "--methods", "nms,frobnicate"}, dir.path());
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.rfind("config:", 0) == 0);
}
