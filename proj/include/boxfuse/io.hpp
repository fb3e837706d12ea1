#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxfuse/detection.hpp"
#include "boxfuse/fusion.hpp"

namespace boxfuse {

// Per-field fusion overrides layered onto defaults: manifest first, then
// command-line flags.
struct FusionOverrides {
  std::optional<FusionMethod> method;
  std::optional<double> iou_threshold;
  std::optional<double> soft_sigma;
  std::optional<SoftMode> soft_mode;
  std::optional<double> soft_score_floor;
  std::optional<double> wbf_skip_threshold;
  std::optional<bool> conf_rescale;
};

FusionConfig apply(FusionConfig config, const FusionOverrides& overrides);

struct ManifestModel {
  int id = 0;
  std::filesystem::path path;
};

// One reproducible description of an n-model ensemble: ground truth, one
// detection file per model, optional fusion overrides. Paths inside the file
// resolve relative to the manifest's directory.
struct EnsembleManifest {
  std::filesystem::path ground_truth;
  std::vector<ManifestModel> models;  // sorted by id after loading
  FusionOverrides fusion;

  int n_models() const { return static_cast<int>(models.size()); }
};

// COCO annotation JSON (subset: images[id, width, height], annotations[id,
// image_id, category_id, bbox], categories[id, name]); bbox is [x, y, w, h].
GroundTruth load_ground_truth(const std::filesystem::path& path);

// COCO results JSON array of {image_id, category_id, bbox, score}; unknown
// keys (e.g. the fused-output extensions) are ignored. Producer order is
// preserved per image.
DetectionStream load_detections(const std::filesystem::path& path, int model_id);

// Same records as load_detections, viewed as already-fused detections.
FusedMap load_fused(const std::filesystem::path& path);

// COCO-results-style array extended with variance / cluster_size /
// source_models per record, sorted by (image_id, score desc), all reals at
// 6-decimal precision.
void write_fused(const std::filesystem::path& path, const FusedMap& fused);

void write_detections(const std::filesystem::path& path, const DetectionStream& stream);

EnsembleManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest);

struct EnsembleData {
  GroundTruth ground_truth;
  EnsembleOutputs outputs;
};

EnsembleData load_ensemble(const EnsembleManifest& manifest);

// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace boxfuse
