#pragma once

#include <set>
#include <string>
#include <vector>

#include "boxfuse/detection.hpp"

namespace boxfuse {

enum class FusionMethod { Nms, SoftNms, Wbf };
enum class SoftMode { Linear, Gaussian };

// Throw ConfigError for unknown names.
FusionMethod parse_fusion_method(const std::string& name);
SoftMode parse_soft_mode(const std::string& name);

std::string to_string(FusionMethod method);
std::string to_string(SoftMode mode);

struct FusionConfig {
  FusionMethod method = FusionMethod::Nms;
  double iou_threshold = 0.5;
  double soft_sigma = 0.5;
  SoftMode soft_mode = SoftMode::Gaussian;
  double soft_score_floor = 0.001;
  double wbf_skip_threshold = 0.2;
  bool conf_rescale = true;
};

// Throws ConfigError when a threshold is outside its documented range.
void validate(const FusionConfig& config);

// Greedy classwise non-maximum suppression. A candidate is removed when its
// IoU with a kept box of the same category is strictly above the threshold;
// survivors carry zero variance.
std::vector<FusedDetection> nms(const std::vector<Detection>& dets, double iou_threshold);

// Like nms, but overlapping boxes have their scores decayed (linearly or
// gaussianly in IoU) instead of being removed outright. Boxes whose decayed
// score falls below config.soft_score_floor are dropped.
std::vector<FusedDetection> soft_nms(const std::vector<Detection>& dets,
                                     const FusionConfig& config);

// Weighted boxes fusion: per category, clusters boxes against the running
// fused box and replaces each cluster by the score-weighted average of its
// member corners, with the unweighted per-corner variance as uncertainty.
std::vector<FusedDetection> wbf(const std::vector<Detection>& dets, int n_models,
                                const FusionConfig& config);

// Pool + dispatch per image over `image_ids` plus every image present in any
// stream. Deterministic for fixed inputs and config.
FusedMap fuse(const EnsembleOutputs& ensemble, const std::set<ImageId>& image_ids,
              const FusionConfig& config);

}  // namespace boxfuse
