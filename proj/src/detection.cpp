#include "boxfuse/detection.hpp"

#include <algorithm>

#include "boxfuse/errors.hpp"

namespace boxfuse {

std::set<ImageId> GroundTruth::image_ids() const {
  std::set<ImageId> ids;
  for (const auto& [id, info] : images) ids.insert(id);
  for (const auto& [id, boxes] : by_image) ids.insert(id);
  return ids;
}

std::int64_t GroundTruth::total_boxes() const {
  std::int64_t n = 0;
  for (const auto& [id, boxes] : by_image) n += static_cast<std::int64_t>(boxes.size());
  return n;
}

void validate(const EnsembleOutputs& ensemble) {
  if (ensemble.n_models <= 0)
    throw DataError("ensemble must contain at least one model");
  if (static_cast<int>(ensemble.streams.size()) != ensemble.n_models)
    throw DataError("ensemble lists " + std::to_string(ensemble.streams.size()) +
                    " streams but declares n_models=" + std::to_string(ensemble.n_models));
  std::vector<char> seen(static_cast<std::size_t>(ensemble.n_models), 0);
  for (const auto& stream : ensemble.streams) {
    if (stream.model_id < 0 || stream.model_id >= ensemble.n_models)
      throw DataError("stream model_id " + std::to_string(stream.model_id) +
                      " outside [0, " + std::to_string(ensemble.n_models) + ")");
    if (seen[static_cast<std::size_t>(stream.model_id)])
      throw DataError("duplicate stream model_id " + std::to_string(stream.model_id));
    seen[static_cast<std::size_t>(stream.model_id)] = 1;
    for (const auto& [image_id, dets] : stream.by_image)
      for (const auto& det : dets)
        if (det.model_id != stream.model_id)
          throw DataError("detection tagged model_id " + std::to_string(det.model_id) +
                          " inside stream " + std::to_string(stream.model_id));
  }
}

std::vector<Detection> pool(const EnsembleOutputs& ensemble, ImageId image_id) {
  // Gather in ascending model_id so the result is independent of the order in
  // which streams were supplied.
  std::vector<const DetectionStream*> by_id(ensemble.streams.size(), nullptr);
  for (const auto& stream : ensemble.streams) {
    const auto idx = static_cast<std::size_t>(stream.model_id);
    if (idx < by_id.size()) by_id[idx] = &stream;
  }

  std::vector<Detection> pooled;
  for (const DetectionStream* stream : by_id) {
    if (stream == nullptr) continue;
    const auto it = stream->by_image.find(image_id);
    if (it == stream->by_image.end()) continue;
    pooled.insert(pooled.end(), it->second.begin(), it->second.end());
  }

  // Stable sort keeps the (model_id, producer order) sequence for equal scores.
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return pooled;
}

}  // namespace boxfuse
