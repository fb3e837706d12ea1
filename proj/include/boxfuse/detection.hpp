#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "boxfuse/geometry.hpp"

namespace boxfuse {

using ImageId = std::int64_t;

// One box emitted by one ensemble member.
struct Detection {
  Box box;
  int category = 0;
  double score = 0.0;  // in [0, 1]
  int model_id = 0;
  ImageId image_id = 0;
};

// All detections of one ensemble member, grouped per image in producer order.
// The producer order participates in score tie-breaking downstream.
struct DetectionStream {
  int model_id = 0;
  std::map<ImageId, std::vector<Detection>> by_image;
};

struct EnsembleOutputs {
  int n_models = 0;
  std::vector<DetectionStream> streams;  // model_ids 0..n_models-1, any order
};

// Output of a fusion strategy. `variance` is the per-corner empirical variance
// across the cluster members; zero for singleton clusters.
struct FusedDetection {
  Box box;
  int category = 0;
  double score = 0.0;
  Eigen::Array4d variance{0.0, 0.0, 0.0, 0.0};
  int cluster_size = 1;
  std::set<int> source_models;
};

struct GtBox {
  Box box;
  int category = 0;
};

struct ImageInfo {
  ImageId id = 0;
  double width = 0.0;
  double height = 0.0;
};

struct GroundTruth {
  std::map<ImageId, std::vector<GtBox>> by_image;
  std::map<ImageId, ImageInfo> images;
  std::map<int, std::string> categories;

  std::set<ImageId> image_ids() const;
  std::int64_t total_boxes() const;
};

using FusedMap = std::map<ImageId, std::vector<FusedDetection>>;

// Throws DataError unless streams carry model ids 0..n_models-1 exactly and
// every detection is tagged with its stream's id.
void validate(const EnsembleOutputs& ensemble);

// All ensemble detections for one image, sorted by (score desc, model_id asc,
// producer order asc). Streams without the image contribute nothing.
std::vector<Detection> pool(const EnsembleOutputs& ensemble, ImageId image_id);

}  // namespace boxfuse
