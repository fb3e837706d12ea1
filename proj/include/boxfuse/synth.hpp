#pragma once

#include <cstdint>

#include "boxfuse/detection.hpp"

namespace boxfuse {

// Perturbs ground truth into n simulated detector streams so the pipeline can
// be exercised without trained networks. Confidence is a noisy quality proxy
// (IoU of the jittered box against its source) raised to the miscalibration
// exponent, so gamma != 1 yields a detector whose confidence systematically
// disagrees with its accuracy.
struct SynthConfig {
  int n_models = 3;
  std::uint64_t seed = 42;
  double coord_noise_sigma = 2.0;  // pixels, per corner
  double score_mean = 0.85;        // confidence scale for a perfect box
  double score_sigma = 0.05;       // confidence noise
  double miss_rate = 0.1;          // [0, 1)
  double false_positive_rate = 0.5;  // expected false boxes per image per model
  double miscalibration_exponent = 1.0;  // gamma
};

void validate(const SynthConfig& config);

// Deterministic for a fixed (gt, config): every (model, image, box) triple
// draws from its own substream, so iteration order cannot change results.
EnsembleOutputs generate(const GroundTruth& gt, const SynthConfig& config);

}  // namespace boxfuse
