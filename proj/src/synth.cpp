#include "boxfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "boxfuse/errors.hpp"
#include "boxfuse/rng.hpp"

namespace boxfuse {

namespace {

constexpr std::uint64_t kTagTruePositive = 0x7B;
constexpr std::uint64_t kTagFalsePositive = 0xFB;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Box normalized(const Eigen::Array4d& corners) {
  return Box(std::min(corners[0], corners[2]), std::min(corners[1], corners[3]),
             std::max(corners[0], corners[2]), std::max(corners[1], corners[3]));
}

double shaped_confidence(double quality, const SynthConfig& config) {
  return std::clamp(config.score_mean * std::pow(quality, config.miscalibration_exponent), 0.01,
                    0.99);
}

}  // namespace

void validate(const SynthConfig& config) {
  if (config.n_models < 1) throw ConfigError("synth requires at least one model");
  if (!(config.coord_noise_sigma >= 0.0))
    throw ConfigError("coord_noise_sigma must be nonnegative");
  if (!(config.score_sigma >= 0.0)) throw ConfigError("score_sigma must be nonnegative");
  if (!(config.score_mean > 0.0 && config.score_mean <= 1.0))
    throw ConfigError("score_mean must lie in (0, 1]");
  if (!(config.miss_rate >= 0.0 && config.miss_rate < 1.0))
    throw ConfigError("miss_rate must lie in [0, 1)");
  if (!(config.false_positive_rate >= 0.0))
    throw ConfigError("false_positive_rate must be nonnegative");
  if (!(config.miscalibration_exponent > 0.0))
    throw ConfigError("miscalibration_exponent must be positive");
}

EnsembleOutputs generate(const GroundTruth& gt, const SynthConfig& config) {
  validate(config);

  // Size donors for false positives, in a fixed global order.
  std::vector<const GtBox*> donors;
  std::set<int> category_set;
  for (const auto& [image_id, boxes] : gt.by_image) {
    for (const GtBox& box : boxes) {
      donors.push_back(&box);
      category_set.insert(box.category);
    }
  }
  const std::vector<int> categories(category_set.begin(), category_set.end());

  EnsembleOutputs out;
  out.n_models = config.n_models;
  for (int model = 0; model < config.n_models; ++model) {
    DetectionStream stream;
    stream.model_id = model;
    for (const auto& [image_id, info] : gt.images) {
      std::vector<Detection> dets;

      const auto bit = gt.by_image.find(image_id);
      const std::size_t n_boxes = bit == gt.by_image.end() ? 0 : bit->second.size();
      for (std::size_t j = 0; j < n_boxes; ++j) {
        const GtBox& src = bit->second[j];
        std::uint64_t key = combine_key(config.seed, kTagTruePositive);
        key = combine_key(key, static_cast<std::uint64_t>(model));
        key = combine_key(key, static_cast<std::uint64_t>(image_id));
        key = combine_key(key, j);
        SubstreamRng rng(key);

        if (rng.next_unit() < config.miss_rate) continue;

        Eigen::Array4d corners = src.box.xyxy;
        for (int c = 0; c < 4; ++c) corners[c] += rng.next_gaussian(0.0, config.coord_noise_sigma);
        const Box jittered = normalized(corners);

        const double quality = iou(jittered, src.box);
        const double noisy = clamp01(quality + rng.next_gaussian(0.0, config.score_sigma));
        dets.push_back({jittered, src.category, shaped_confidence(noisy, config), model, image_id});
      }

      if (!donors.empty() && !categories.empty()) {
        std::uint64_t key = combine_key(config.seed, kTagFalsePositive);
        key = combine_key(key, static_cast<std::uint64_t>(model));
        key = combine_key(key, static_cast<std::uint64_t>(image_id));
        SubstreamRng rng(key);
        const int n_fp = rng.next_poisson(config.false_positive_rate);
        for (int t = 0; t < n_fp; ++t) {
          const GtBox& donor = *donors[rng.next_below(donors.size())];
          const double w = std::min(donor.box.width(), info.width);
          const double h = std::min(donor.box.height(), info.height);
          const double cx =
              info.width > w ? rng.next_uniform(w / 2.0, info.width - w / 2.0) : info.width / 2.0;
          const double cy =
              info.height > h ? rng.next_uniform(h / 2.0, info.height - h / 2.0)
                              : info.height / 2.0;
          const Box fake(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0);
          const int category = categories[rng.next_below(categories.size())];
          const double low_quality = rng.next_uniform(0.02, 0.45);
          dets.push_back({fake, category, shaped_confidence(low_quality, config), model, image_id});
        }
      }

      if (!dets.empty()) stream.by_image[image_id] = std::move(dets);
    }
    out.streams.push_back(std::move(stream));
  }
  return out;
}

}  // namespace boxfuse
