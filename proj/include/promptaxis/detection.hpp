// Copyright 2026 The promptaxis Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ground truth (COCO JSON subset) and per-(image, prompt) predictions
// (JSON Lines prediction cache).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "promptaxis/error.hpp"

namespace promptaxis {

using json = nlohmann::json;
using ImageId = std::int64_t;

// [x, y, w, h] in absolute pixels, (x, y) the top-left corner.
struct BBox {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const { return w * h; }
  bool has_positive_area() const { return w > 0 && h > 0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline json bbox_to_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

inline BBox bbox_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kParseError, where + ": bbox must be [x,y,w,h]");
  }
  BBox b;
  double* fields[] = {&b.x, &b.y, &b.w, &b.h};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) {
      throw Error(ErrorCode::kParseError, where + ": bbox entries must be numbers");
    }
    *fields[i] = j[i].get<double>();
    if (!std::isfinite(*fields[i])) {
      throw Error(ErrorCode::kParseError, where + ": non-finite bbox");
    }
  }
  return b;
}

struct ImageInfo {
  ImageId id = 0;
  std::string file_name;
  double width = 0;
  double height = 0;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct GtAnnotation {
  std::int64_t id = 0;
  ImageId image_id = 0;
  BBox box;

  friend bool operator==(const GtAnnotation&, const GtAnnotation&) = default;
};

class GroundTruthSet {
 public:
  GroundTruthSet() = default;

  // Images sorted by id, annotations by (image_id, id).
  GroundTruthSet(std::vector<ImageInfo> images,
                 std::vector<GtAnnotation> annotations,
                 std::string category_name)
      : images_(std::move(images)),
        annotations_(std::move(annotations)),
        category_name_(std::move(category_name)) {
    finalize();
  }

  static GroundTruthSet from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("images") ||
        !doc["images"].is_array() || !doc.contains("annotations") ||
        !doc["annotations"].is_array()) {
      throw Error(ErrorCode::kParseError,
                  "COCO file needs \"images\" and \"annotations\" arrays");
    }
    GroundTruthSet gt;
    try {
      for (const json& img : doc["images"]) {
        ImageInfo info;
        info.id = img.at("id").get<ImageId>();
        info.file_name = img.value("file_name", std::string());
        info.width = img.at("width").get<double>();
        info.height = img.at("height").get<double>();
        gt.images_.push_back(std::move(info));
      }
      std::string category;
      if (doc.contains("categories") && doc["categories"].is_array()) {
        const json& cats = doc["categories"];
        if (!cats.empty()) category = cats[0].value("name", std::string());
        if (cats.size() > 1) {
          gt.warnings_.push_back(
              std::to_string(cats.size()) +
              " categories present; all annotations are pooled as one class");
        }
      }
      gt.category_name_ = category;
      for (const json& ann : doc["annotations"]) {
        GtAnnotation a;
        a.id = ann.at("id").get<std::int64_t>();
        a.image_id = ann.at("image_id").get<ImageId>();
        a.box = bbox_from_json(ann.at("bbox"),
                               "annotation " + std::to_string(a.id));
        gt.annotations_.push_back(a);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what());
    }
    gt.finalize();
    return gt;
  }

  static GroundTruthSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open annotation file " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
    return from_json(doc);
  }

  json to_json() const {
    json images = json::array();
    for (const auto& img : images_) {
      images.push_back({{"id", img.id},
                        {"file_name", img.file_name},
                        {"width", img.width},
                        {"height", img.height}});
    }
    json anns = json::array();
    for (const auto& a : annotations_) {
      anns.push_back({{"id", a.id},
                      {"image_id", a.image_id},
                      {"bbox", bbox_to_json(a.box)},
                      {"category_id", 1}});
    }
    return {{"images", std::move(images)},
            {"annotations", std::move(anns)},
            {"categories", json::array({{{"id", 1}, {"name", category_name_}}})}};
  }

  const std::vector<ImageInfo>& images() const { return images_; }
  const std::vector<GtAnnotation>& annotations() const { return annotations_; }
  const std::string& category_name() const { return category_name_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool has_image(ImageId id) const { return image_index_.count(id) > 0; }

  const ImageInfo& image(ImageId id) const {
    auto it = image_index_.find(id);
    if (it == image_index_.end()) {
      throw Error(ErrorCode::kUnknownImage, std::to_string(id));
    }
    return images_[it->second];
  }

  std::vector<GtAnnotation> annotations_for(ImageId id) const {
    auto [lo, hi] = ann_ranges_.count(id)
                        ? ann_ranges_.at(id)
                        : std::pair<std::size_t, std::size_t>{0, 0};
    return {annotations_.begin() + static_cast<std::ptrdiff_t>(lo),
            annotations_.begin() + static_cast<std::ptrdiff_t>(hi)};
  }

  friend bool operator==(const GroundTruthSet& a, const GroundTruthSet& b) {
    return a.images_ == b.images_ && a.annotations_ == b.annotations_ &&
           a.category_name_ == b.category_name_;
  }

 private:
  void finalize() {
    std::sort(images_.begin(), images_.end(),
              [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });
    image_index_.clear();
    for (std::size_t i = 0; i < images_.size(); ++i) {
      if (!image_index_.emplace(images_[i].id, i).second) {
        throw Error(ErrorCode::kParseError,
                    "duplicate image id " + std::to_string(images_[i].id));
      }
    }
    std::sort(annotations_.begin(), annotations_.end(),
              [](const GtAnnotation& a, const GtAnnotation& b) {
                return std::pair(a.image_id, a.id) < std::pair(b.image_id, b.id);
              });
    std::set<std::int64_t> ann_ids;
    for (auto& a : annotations_) {
      const std::string where = "annotation " + std::to_string(a.id);
      if (!ann_ids.insert(a.id).second) {
        throw Error(ErrorCode::kParseError, "duplicate " + where);
      }
      auto it = image_index_.find(a.image_id);
      if (it == image_index_.end()) {
        throw Error(ErrorCode::kDanglingAnnotation,
                    where + " references missing image " +
                        std::to_string(a.image_id));
      }
      if (!a.box.has_positive_area()) {
        throw Error(ErrorCode::kZeroAreaBox, where);
      }
      clamp_to_image(a, images_[it->second]);
    }
    ann_ranges_.clear();
    for (std::size_t i = 0; i < annotations_.size();) {
      std::size_t j = i;
      while (j < annotations_.size() &&
             annotations_[j].image_id == annotations_[i].image_id) {
        ++j;
      }
      ann_ranges_[annotations_[i].image_id] = {i, j};
      i = j;
    }
  }

  void clamp_to_image(GtAnnotation& a, const ImageInfo& img) {
    if (img.width <= 0 || img.height <= 0) return;
    BBox b = a.box;
    double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
    double x1 = std::min(img.width, b.x + b.w);
    double y1 = std::min(img.height, b.y + b.h);
    BBox clamped{x0, y0, x1 - x0, y1 - y0};
    if (clamped == b) return;
    if (!clamped.has_positive_area()) {
      throw Error(ErrorCode::kZeroAreaBox,
                  "annotation " + std::to_string(a.id) + " lies outside its image");
    }
    warnings_.push_back("annotation " + std::to_string(a.id) +
                        " clamped to image bounds");
    a.box = clamped;
  }

  std::vector<ImageInfo> images_;
  std::vector<GtAnnotation> annotations_;
  std::string category_name_;
  std::vector<std::string> warnings_;
  std::map<ImageId, std::size_t> image_index_;
  std::map<ImageId, std::pair<std::size_t, std::size_t>> ann_ranges_;
};

struct ScoredBox {
  BBox box;
  double score = 0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

inline void check_prediction(const ScoredBox& d, const std::string& where) {
  if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
    throw Error(ErrorCode::kScoreOutOfRange,
                where + ": score " + std::to_string(d.score));
  }
  if (!d.box.has_positive_area()) {
    throw Error(ErrorCode::kZeroAreaBox, where + ": prediction box");
  }
}

// Predictions keyed by (image_id, exact rendered prompt text). Box order
// within an entry is preserved; it is the tie order for equal scores.
class DetectionSet {
 public:
  using Key = std::pair<ImageId, std::string>;

  void set(ImageId image_id, const std::string& prompt,
           std::vector<ScoredBox> boxes) {
    const std::string where =
        "image " + std::to_string(image_id) + " prompt \"" + prompt + "\"";
    for (const auto& d : boxes) check_prediction(d, where);
    auto [it, inserted] = entries_.insert_or_assign(Key{image_id, prompt},
                                                    std::move(boxes));
    if (!inserted) warnings_.push_back("duplicate entry for " + where + "; last wins");
  }

  const std::vector<ScoredBox>* find(ImageId image_id,
                                     const std::string& prompt) const {
    auto it = entries_.find(Key{image_id, prompt});
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool has_prompt(const std::string& prompt) const {
    for (const auto& [key, _] : entries_) {
      if (key.second == prompt) return true;
    }
    return false;
  }

  std::set<std::string> prompts() const {
    std::set<std::string> out;
    for (const auto& [key, _] : entries_) out.insert(key.second);
    return out;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<Key, std::vector<ScoredBox>>& entries() const { return entries_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Throws kUnknownImage for entries whose image is absent from `gt`.
  void validate_images(const GroundTruthSet& gt) const {
    for (const auto& [key, _] : entries_) {
      if (!gt.has_image(key.first)) {
        throw Error(ErrorCode::kUnknownImage,
                    "prediction for image " + std::to_string(key.first) +
                        " not in ground truth");
      }
    }
  }

  static DetectionSet from_jsonl(std::istream& in) {
    DetectionSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = "line " + std::to_string(line_no);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kParseError, where + ": " + e.what());
      }
      ImageId image_id = 0;
      std::string prompt;
      std::vector<ScoredBox> boxes;
      try {
        image_id = j.at("image_id").get<ImageId>();
        prompt = j.at("prompt").get<std::string>();
        for (const json& d : j.at("detections")) {
          ScoredBox sb;
          sb.box = bbox_from_json(d.at("bbox"), where);
          sb.score = d.at("score").get<double>();
          boxes.push_back(sb);
        }
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError, where + ": " + e.what());
      }
      set.set(image_id, prompt, std::move(boxes));
    }
    return set;
  }

  static DetectionSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open prediction cache " + path);
    return from_jsonl(in);
  }

  // Canonical order: (image_id, prompt).
  std::string to_jsonl() const {
    std::string out;
    for (const auto& [key, boxes] : entries_) {
      json dets = json::array();
      for (const auto& d : boxes) {
        dets.push_back({{"bbox", bbox_to_json(d.box)}, {"score", d.score}});
      }
      json line = {{"image_id", key.first},
                   {"prompt", key.second},
                   {"detections", std::move(dets)}};
      out += line.dump();
      out += '\n';
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
    out << to_jsonl();
  }

  friend bool operator==(const DetectionSet& a, const DetectionSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::map<Key, std::vector<ScoredBox>> entries_;
  std::vector<std::string> warnings_;
};

}  // namespace promptaxis
