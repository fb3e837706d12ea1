#include "boxfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxfuse/errors.hpp"

namespace boxfuse {

namespace {

// Ranking shared by all fusers: score desc, then model_id asc, then position
// in the supplied list. Total order, so results are reproducible.
std::vector<std::size_t> ranked_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&dets](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].model_id != dets[b].model_id) return dets[a].model_id < dets[b].model_id;
    return a < b;
  });
  return order;
}

FusedDetection as_fused(const Detection& det, double score) {
  FusedDetection fused;
  fused.box = det.box;
  fused.category = det.category;
  fused.score = score;
  fused.cluster_size = 1;
  fused.source_models = {det.model_id};
  return fused;
}

struct WbfCluster {
  int category = 0;
  std::vector<Detection> members;
  double weight_sum = 0.0;
  double score_sum = 0.0;
  Eigen::Array4d weighted_corners{0.0, 0.0, 0.0, 0.0};
  Box fused;

  void add(const Detection& det) {
    members.push_back(det);
    weight_sum += det.score;
    score_sum += det.score;
    weighted_corners += det.score * det.box.xyxy;
    fused.xyxy = weighted_corners / weight_sum;
  }
};

// Unweighted population variance of the member corners. Deviations are taken
// against the first member so identical members yield an exact zero.
Eigen::Array4d cluster_variance(const std::vector<Detection>& members) {
  const auto n = static_cast<double>(members.size());
  const Eigen::Array4d base = members.front().box.xyxy;
  Eigen::Array4d delta_sum = Eigen::Array4d::Zero();
  for (const Detection& det : members) delta_sum += det.box.xyxy - base;
  const Eigen::Array4d delta_mean = delta_sum / n;
  Eigen::Array4d var = Eigen::Array4d::Zero();
  for (const Detection& det : members) {
    const Eigen::Array4d d = (det.box.xyxy - base) - delta_mean;
    var += d * d;
  }
  return var / n;
}

}  // namespace

FusionMethod parse_fusion_method(const std::string& name) {
  if (name == "nms") return FusionMethod::Nms;
  if (name == "softnms") return FusionMethod::SoftNms;
  if (name == "wbf") return FusionMethod::Wbf;
  throw ConfigError("unknown fusion method '" + name + "' (expected nms, softnms or wbf)");
}

SoftMode parse_soft_mode(const std::string& name) {
  if (name == "linear") return SoftMode::Linear;
  if (name == "gaussian") return SoftMode::Gaussian;
  throw ConfigError("unknown soft-nms mode '" + name + "' (expected linear or gaussian)");
}

std::string to_string(FusionMethod method) {
  switch (method) {
    case FusionMethod::Nms:
      return "nms";
    case FusionMethod::SoftNms:
      return "softnms";
    case FusionMethod::Wbf:
      return "wbf";
  }
  return "unknown";
}

std::string to_string(SoftMode mode) {
  return mode == SoftMode::Linear ? "linear" : "gaussian";
}

void validate(const FusionConfig& config) {
  switch (config.method) {
    case FusionMethod::Nms:
    case FusionMethod::SoftNms:
    case FusionMethod::Wbf:
      break;
    default:
      throw ConfigError("unknown fusion method");
  }
  if (!(config.iou_threshold > 0.0 && config.iou_threshold <= 1.0))
    throw ConfigError("iou_threshold must lie in (0, 1], got " +
                      std::to_string(config.iou_threshold));
  if (!(config.soft_sigma > 0.0))
    throw ConfigError("soft_sigma must be positive, got " + std::to_string(config.soft_sigma));
  if (!(config.soft_score_floor >= 0.0))
    throw ConfigError("soft_score_floor must be nonnegative, got " +
                      std::to_string(config.soft_score_floor));
  if (!(config.wbf_skip_threshold >= 0.0 && config.wbf_skip_threshold < 1.0))
    throw ConfigError("wbf_skip_threshold must lie in [0, 1), got " +
                      std::to_string(config.wbf_skip_threshold));
}

std::vector<FusedDetection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  const auto order = ranked_order(dets);
  std::vector<char> suppressed(dets.size(), 0);
  std::vector<FusedDetection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t cur = order[i];
    if (suppressed[cur]) continue;
    kept.push_back(as_fused(dets[cur], dets[cur].score));
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t cand = order[j];
      if (suppressed[cand] || dets[cand].category != dets[cur].category) continue;
      if (iou(dets[cur].box, dets[cand].box) > iou_threshold) suppressed[cand] = 1;
    }
  }
  // Selection order is already score-descending.
  return kept;
}

std::vector<FusedDetection> soft_nms(const std::vector<Detection>& dets,
                                     const FusionConfig& config) {
  struct Candidate {
    std::size_t idx;
    double score;
  };
  std::vector<Candidate> alive;
  alive.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) alive.push_back({i, dets[i].score});

  std::vector<FusedDetection> kept;
  while (!alive.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < alive.size(); ++k) {
      const Detection& a = dets[alive[k].idx];
      const Detection& b = dets[alive[best].idx];
      if (alive[k].score != alive[best].score) {
        if (alive[k].score > alive[best].score) best = k;
      } else if (a.model_id != b.model_id) {
        if (a.model_id < b.model_id) best = k;
      } else if (alive[k].idx < alive[best].idx) {
        best = k;
      }
    }
    const Candidate selected = alive[best];
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best));
    const Detection& sel = dets[selected.idx];
    kept.push_back(as_fused(sel, selected.score));

    for (auto& cand : alive) {
      const Detection& det = dets[cand.idx];
      if (det.category != sel.category) continue;
      const double u = iou(sel.box, det.box);
      if (u <= 0.0) continue;
      // Only a decay event can drop a candidate below the floor; boxes that
      // are never decayed keep whatever score they came in with.
      if (config.soft_mode == SoftMode::Linear) {
        if (u > config.iou_threshold) {
          cand.score *= (1.0 - u);
          if (cand.score < config.soft_score_floor) cand.score = -1.0;
        }
      } else {
        cand.score *= std::exp(-(u * u) / config.soft_sigma);
        if (cand.score < config.soft_score_floor) cand.score = -1.0;
      }
    }
    std::erase_if(alive, [](const Candidate& c) { return c.score < 0.0; });
  }
  return kept;
}

std::vector<FusedDetection> wbf(const std::vector<Detection>& dets, int n_models,
                                const FusionConfig& config) {
  if (n_models < 1) throw ConfigError("wbf requires n_models >= 1");

  std::vector<Detection> candidates;
  candidates.reserve(dets.size());
  for (const Detection& det : dets)
    if (det.score > config.wbf_skip_threshold) candidates.push_back(det);

  std::vector<WbfCluster> clusters;
  std::set<int> categories;
  for (const Detection& det : candidates) categories.insert(det.category);

  for (int category : categories) {
    std::vector<Detection> cat_dets;
    for (const Detection& det : candidates)
      if (det.category == category) cat_dets.push_back(det);
    const std::size_t first_cluster = clusters.size();

    for (std::size_t idx : ranked_order(cat_dets)) {
      const Detection& det = cat_dets[idx];
      std::size_t best_cluster = clusters.size();
      double best_iou = 0.0;
      for (std::size_t c = first_cluster; c < clusters.size(); ++c) {
        const double u = iou(clusters[c].fused, det.box);
        if (u > best_iou) {
          best_iou = u;
          best_cluster = c;
        }
      }
      if (best_cluster < clusters.size() && best_iou > config.iou_threshold) {
        clusters[best_cluster].add(det);
      } else {
        WbfCluster cluster;
        cluster.category = category;
        cluster.add(det);
        clusters.push_back(std::move(cluster));
      }
    }
  }

  std::vector<FusedDetection> out;
  out.reserve(clusters.size());
  for (const WbfCluster& cluster : clusters) {
    FusedDetection fused;
    fused.box = cluster.fused;
    fused.category = cluster.category;
    const auto size = static_cast<int>(cluster.members.size());
    fused.cluster_size = size;
    fused.score = cluster.score_sum / static_cast<double>(size);
    if (config.conf_rescale)
      fused.score *= static_cast<double>(std::min(size, n_models)) / static_cast<double>(n_models);
    fused.variance = size > 1 ? cluster_variance(cluster.members) : Eigen::Array4d::Zero();
    Eigen::Array4d lo = cluster.members.front().box.xyxy;
    Eigen::Array4d hi = lo;
    for (const Detection& m : cluster.members) {
      lo = lo.min(m.box.xyxy);
      hi = hi.max(m.box.xyxy);
      fused.source_models.insert(m.model_id);
    }
    // The weighted mean is convex; clamping only absorbs rounding.
    fused.box.xyxy = fused.box.xyxy.max(lo).min(hi);
    out.push_back(std::move(fused));
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const FusedDetection& a, const FusedDetection& b) { return a.score > b.score; });
  return out;
}

FusedMap fuse(const EnsembleOutputs& ensemble, const std::set<ImageId>& image_ids,
              const FusionConfig& config) {
  validate(config);
  validate(ensemble);

  std::set<ImageId> ids = image_ids;
  for (const auto& stream : ensemble.streams)
    for (const auto& [image_id, dets] : stream.by_image) ids.insert(image_id);

  FusedMap out;
  for (ImageId image_id : ids) {
    const std::vector<Detection> pooled = pool(ensemble, image_id);
    switch (config.method) {
      case FusionMethod::Nms:
        out[image_id] = nms(pooled, config.iou_threshold);
        break;
      case FusionMethod::SoftNms:
        out[image_id] = soft_nms(pooled, config);
        break;
      case FusionMethod::Wbf:
        out[image_id] = wbf(pooled, ensemble.n_models, config);
        break;
      default:
        throw ConfigError("unknown fusion method");
    }
  }
  return out;
}

}  // namespace boxfuse
