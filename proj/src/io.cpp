#include "boxfuse/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "boxfuse/errors.hpp"
#include "boxfuse/format.hpp"

namespace boxfuse {

namespace {

using njson = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + " file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

njson parse_json(const std::filesystem::path& path, const char* what) {
  const std::string text = read_file(path, what);
  try {
    return njson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

const njson& require_field(const njson& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key))
    throw DataError(context + ": missing field '" + key + "'");
  return obj.at(key);
}

double require_number(const njson& obj, const char* key, const std::string& context) {
  const njson& v = require_field(obj, key, context);
  if (!v.is_number()) throw DataError(context + ": field '" + key + "' is not a number");
  return v.get<double>();
}

std::int64_t require_int(const njson& obj, const char* key, const std::string& context) {
  const njson& v = require_field(obj, key, context);
  if (!v.is_number_integer())
    throw DataError(context + ": field '" + key + "' is not an integer");
  return v.get<std::int64_t>();
}

struct ParsedBbox {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

ParsedBbox parse_bbox(const njson& record, const std::string& context) {
  const njson& bbox = require_field(record, "bbox", context);
  if (!bbox.is_array() || bbox.size() != 4)
    throw DataError(context + ": bbox must be an array of 4 numbers");
  ParsedBbox out;
  double* fields[4] = {&out.x, &out.y, &out.w, &out.h};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!bbox[i].is_number()) throw DataError(context + ": bbox element is not a number");
    *fields[i] = bbox[i].get<double>();
    if (!std::isfinite(*fields[i]))
      throw DataError(context + ": bbox has a non-finite value");
  }
  return out;
}

// Writes a double that reparses to the exact 6-decimal value.
double wire6(double value) { return round6(value); }

njson detection_record(ImageId image_id, int category, const Box& box, double score) {
  // Corners are converted to the COCO [x, y, w, h] form in exact micro-pixel
  // units so that x + w reproduces the rounded corner on reload.
  const std::int64_t x1 = std::llround(box.x1() * 1e6);
  const std::int64_t y1 = std::llround(box.y1() * 1e6);
  const std::int64_t x2 = std::llround(box.x2() * 1e6);
  const std::int64_t y2 = std::llround(box.y2() * 1e6);
  njson rec;
  rec["image_id"] = image_id;
  rec["category_id"] = category;
  rec["bbox"] = {static_cast<double>(x1) / 1e6, static_cast<double>(y1) / 1e6,
                 static_cast<double>(x2 - x1) / 1e6, static_cast<double>(y2 - y1) / 1e6};
  rec["score"] = wire6(score);
  return rec;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out << text;
  if (!out) throw IoError("failed while writing: " + path.string());
}

}  // namespace

FusionConfig apply(FusionConfig config, const FusionOverrides& overrides) {
  if (overrides.method) config.method = *overrides.method;
  if (overrides.iou_threshold) config.iou_threshold = *overrides.iou_threshold;
  if (overrides.soft_sigma) config.soft_sigma = *overrides.soft_sigma;
  if (overrides.soft_mode) config.soft_mode = *overrides.soft_mode;
  if (overrides.soft_score_floor) config.soft_score_floor = *overrides.soft_score_floor;
  if (overrides.wbf_skip_threshold) config.wbf_skip_threshold = *overrides.wbf_skip_threshold;
  if (overrides.conf_rescale) config.conf_rescale = *overrides.conf_rescale;
  return config;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const njson doc = parse_json(path, "ground truth");
  const std::string ctx = path.string();

  GroundTruth gt;
  const njson& images = require_field(doc, "images", ctx);
  if (!images.is_array()) throw DataError(ctx + ": 'images' must be an array");
  for (const njson& image : images) {
    const std::string ictx = ctx + ": image entry";
    ImageInfo info;
    info.id = require_int(image, "id", ictx);
    info.width = require_number(image, "width", ictx);
    info.height = require_number(image, "height", ictx);
    if (!std::isfinite(info.width) || !std::isfinite(info.height) || info.width <= 0 ||
        info.height <= 0)
      throw DataError(ctx + ": image " + std::to_string(info.id) +
                      ": width/height must be positive");
    if (gt.images.count(info.id))
      throw DataError(ctx + ": duplicate image id " + std::to_string(info.id));
    gt.images[info.id] = info;
    gt.by_image[info.id];  // every listed image gets an annotation slot
  }

  const njson& categories = require_field(doc, "categories", ctx);
  if (!categories.is_array()) throw DataError(ctx + ": 'categories' must be an array");
  for (const njson& cat : categories) {
    const std::string cctx = ctx + ": category entry";
    const auto id = static_cast<int>(require_int(cat, "id", cctx));
    std::string name;
    if (cat.contains("name") && cat.at("name").is_string()) name = cat.at("name").get<std::string>();
    gt.categories[id] = name;
  }

  const njson& annotations = require_field(doc, "annotations", ctx);
  if (!annotations.is_array()) throw DataError(ctx + ": 'annotations' must be an array");
  for (const njson& ann : annotations) {
    const std::int64_t ann_id = require_int(ann, "id", ctx + ": annotation entry");
    const std::string actx = ctx + ": annotation " + std::to_string(ann_id);
    const ImageId image_id = require_int(ann, "image_id", actx);
    if (!gt.images.count(image_id))
      throw DataError(actx + " references unknown image_id " + std::to_string(image_id));
    const auto category = static_cast<int>(require_int(ann, "category_id", actx));
    const ParsedBbox bbox = parse_bbox(ann, actx);
    if (bbox.w <= 0.0 || bbox.h <= 0.0)
      throw DataError(actx + ": bbox width/height must be positive");
    gt.by_image[image_id].push_back({Box::from_xywh(bbox.x, bbox.y, bbox.w, bbox.h), category});
  }
  return gt;
}

DetectionStream load_detections(const std::filesystem::path& path, int model_id) {
  const njson doc = parse_json(path, "detections");
  if (!doc.is_array())
    throw DataError(path.string() + ": detections file must be a JSON array");

  DetectionStream stream;
  stream.model_id = model_id;
  std::size_t index = 0;
  for (const njson& rec : doc) {
    const std::string ctx = path.string() + ": record " + std::to_string(index);
    Detection det;
    det.image_id = require_int(rec, "image_id", ctx);
    det.category = static_cast<int>(require_int(rec, "category_id", ctx));
    det.score = require_number(rec, "score", ctx);
    if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0)
      throw DataError(ctx + ": score " + std::to_string(det.score) + " outside [0, 1]");
    const ParsedBbox bbox = parse_bbox(rec, ctx);
    if (bbox.w < 0.0 || bbox.h < 0.0)
      throw DataError(ctx + ": bbox width/height must be nonnegative");
    det.box = Box::from_xywh(bbox.x, bbox.y, bbox.w, bbox.h);
    det.model_id = model_id;
    stream.by_image[det.image_id].push_back(det);
    ++index;
  }
  return stream;
}

FusedMap load_fused(const std::filesystem::path& path) {
  const DetectionStream stream = load_detections(path, 0);
  FusedMap fused;
  for (const auto& [image_id, dets] : stream.by_image) {
    std::vector<FusedDetection>& out = fused[image_id];
    out.reserve(dets.size());
    for (const Detection& det : dets) {
      FusedDetection f;
      f.box = det.box;
      f.category = det.category;
      f.score = det.score;
      out.push_back(std::move(f));
    }
  }
  return fused;
}

void write_fused(const std::filesystem::path& path, const FusedMap& fused) {
  njson records = njson::array();
  for (const auto& [image_id, dets] : fused) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&dets](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });
    for (std::size_t i : order) {
      const FusedDetection& det = dets[i];
      njson rec = detection_record(image_id, det.category, det.box, det.score);
      rec["variance"] = {wire6(det.variance[0]), wire6(det.variance[1]), wire6(det.variance[2]),
                         wire6(det.variance[3])};
      rec["cluster_size"] = det.cluster_size;
      rec["source_models"] = det.source_models;  // std::set serializes ascending
      records.push_back(std::move(rec));
    }
  }
  write_text(path, records.dump() + "\n");
}

void write_detections(const std::filesystem::path& path, const DetectionStream& stream) {
  njson records = njson::array();
  for (const auto& [image_id, dets] : stream.by_image)
    for (const Detection& det : dets)
      records.push_back(detection_record(image_id, det.category, det.box, det.score));
  write_text(path, records.dump() + "\n");
}

EnsembleManifest load_manifest(const std::filesystem::path& path) {
  njson doc;
  try {
    doc = parse_json(path, "manifest");
  } catch (const DataError& e) {
    throw ConfigError(e.what());  // a broken manifest is a configuration problem
  }
  const std::string ctx = path.string();
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path()
                                                            : std::filesystem::path(".");

  EnsembleManifest manifest;
  const njson& gt = require_field(doc, "ground_truth", ctx);
  if (!gt.is_string()) throw ConfigError(ctx + ": 'ground_truth' must be a path string");
  manifest.ground_truth = base / gt.get<std::string>();

  const njson& models = require_field(doc, "models", ctx);
  if (!models.is_array() || models.empty())
    throw ConfigError(ctx + ": 'models' must be a nonempty array");
  for (const njson& entry : models) {
    const std::string mctx = ctx + ": model entry";
    ManifestModel model;
    model.id = static_cast<int>(require_int(entry, "id", mctx));
    const njson& mpath = require_field(entry, "path", mctx);
    if (!mpath.is_string()) throw ConfigError(mctx + ": 'path' must be a string");
    model.path = base / mpath.get<std::string>();
    manifest.models.push_back(std::move(model));
  }
  std::sort(manifest.models.begin(), manifest.models.end(),
            [](const ManifestModel& a, const ManifestModel& b) { return a.id < b.id; });
  for (int i = 0; i < manifest.n_models(); ++i)
    if (manifest.models[static_cast<std::size_t>(i)].id != i)
      throw ConfigError(ctx + ": model ids must be unique and contiguous from 0");

  if (doc.contains("fusion")) {
    const njson& fusion = doc.at("fusion");
    if (!fusion.is_object()) throw ConfigError(ctx + ": 'fusion' must be an object");
    for (const auto& [key, value] : fusion.items()) {
      try {
        if (key == "method") {
          manifest.fusion.method = parse_fusion_method(value.get<std::string>());
        } else if (key == "iou_threshold") {
          manifest.fusion.iou_threshold = value.get<double>();
        } else if (key == "soft_sigma") {
          manifest.fusion.soft_sigma = value.get<double>();
        } else if (key == "soft_mode") {
          manifest.fusion.soft_mode = parse_soft_mode(value.get<std::string>());
        } else if (key == "soft_score_floor") {
          manifest.fusion.soft_score_floor = value.get<double>();
        } else if (key == "wbf_skip_threshold") {
          manifest.fusion.wbf_skip_threshold = value.get<double>();
        } else if (key == "conf_rescale") {
          manifest.fusion.conf_rescale = value.get<bool>();
        } else {
          throw ConfigError(ctx + ": unknown fusion option '" + key + "'");
        }
      } catch (const nlohmann::json::type_error&) {
        throw ConfigError(ctx + ": fusion option '" + key + "' has the wrong type");
      }
    }
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest) {
  njson doc;
  doc["ground_truth"] = manifest.ground_truth.generic_string();
  njson models = njson::array();
  for (const ManifestModel& model : manifest.models) {
    njson entry;
    entry["id"] = model.id;
    entry["path"] = model.path.generic_string();
    models.push_back(std::move(entry));
  }
  doc["models"] = std::move(models);
  njson fusion = njson::object();
  const FusionOverrides& f = manifest.fusion;
  if (f.method) fusion["method"] = to_string(*f.method);
  if (f.iou_threshold) fusion["iou_threshold"] = *f.iou_threshold;
  if (f.soft_sigma) fusion["soft_sigma"] = *f.soft_sigma;
  if (f.soft_mode) fusion["soft_mode"] = to_string(*f.soft_mode);
  if (f.soft_score_floor) fusion["soft_score_floor"] = *f.soft_score_floor;
  if (f.wbf_skip_threshold) fusion["wbf_skip_threshold"] = *f.wbf_skip_threshold;
  if (f.conf_rescale) fusion["conf_rescale"] = *f.conf_rescale;
  doc["fusion"] = std::move(fusion);
  write_text(path, doc.dump(2) + "\n");
}

EnsembleData load_ensemble(const EnsembleManifest& manifest) {
  EnsembleData data;
  data.ground_truth = load_ground_truth(manifest.ground_truth);
  data.outputs.n_models = manifest.n_models();
  for (const ManifestModel& model : manifest.models)
    data.outputs.streams.push_back(load_detections(model.path, model.id));
  validate(data.outputs);
  return data;
}

std::string file_digest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path, "input");
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace boxfuse
