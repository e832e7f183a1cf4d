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

#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace promptaxis {
namespace {

using testutil::error_code;

json two_image_doc() {
  return json::parse(R"({
    "images": [{"id": 2, "file_name": "b.png", "width": 100, "height": 80},
               {"id": 1, "file_name": "a.png", "width": 100, "height": 80}],
    "annotations": [
      {"id": 12, "image_id": 2, "bbox": [5, 5, 10, 10], "category_id": 1},
      {"id": 10, "image_id": 1, "bbox": [0, 0, 20, 20], "category_id": 1},
      {"id": 11, "image_id": 1, "bbox": [40, 40, 10, 30], "category_id": 1}],
    "categories": [{"id": 1, "name": "flower"}]})");
}

TEST(GroundTruth, LoadsAndIndexesByImage) {
  const GroundTruthSet gt = GroundTruthSet::from_json(two_image_doc());
  ASSERT_EQ(gt.images().size(), 2u);
  EXPECT_EQ(gt.images()[0].id, 1);
  EXPECT_EQ(gt.annotations().size(), 3u);
  EXPECT_EQ(gt.annotations_for(1).size(), 2u);
  EXPECT_EQ(gt.annotations_for(2).size(), 1u);
  EXPECT_TRUE(gt.annotations_for(99).empty());
  EXPECT_EQ(gt.category_name(), "flower");
  EXPECT_TRUE(gt.warnings().empty());
  EXPECT_EQ(GroundTruthSet::from_json(gt.to_json()), gt);
}

TEST(GroundTruth, DanglingAnnotationRejected) {
  json doc = two_image_doc();
  doc["annotations"][0]["image_id"] = 7;
  EXPECT_EQ(error_code([&] { GroundTruthSet::from_json(doc); }),
            ErrorCode::kDanglingAnnotation);
}

TEST(GroundTruth, ZeroAreaBoxRejected) {
  json doc = two_image_doc();
  doc["annotations"][1]["bbox"] = {10, 10, 0, 5};
  EXPECT_EQ(error_code([&] { GroundTruthSet::from_json(doc); }),
            ErrorCode::kZeroAreaBox);
}

TEST(GroundTruth, OutOfBoundsBoxIsClampedWithWarning) {
  json doc = two_image_doc();
  doc["annotations"][2]["bbox"] = {90, 70, 20, 20};
  const GroundTruthSet gt = GroundTruthSet::from_json(doc);
  ASSERT_EQ(gt.warnings().size(), 1u);
  const auto anns = gt.annotations_for(1);
  const auto it = std::find_if(anns.begin(), anns.end(),
                               [](const GtAnnotation& a) { return a.id == 11; });
  ASSERT_NE(it, anns.end());
  EXPECT_EQ(it->box, (BBox{90, 70, 10, 10}));
}

TEST(GroundTruth, MalformedInputs) {
  EXPECT_EQ(error_code([] { GroundTruthSet::from_json(json::object()); }),
            ErrorCode::kParseError);
  json doc = two_image_doc();
  doc["annotations"][0]["id"] = 10;
  EXPECT_EQ(error_code([&] { GroundTruthSet::from_json(doc); }),
            ErrorCode::kParseError);
  EXPECT_EQ(error_code([] { GroundTruthSet::load("/nonexistent/gt.json"); }),
            ErrorCode::kIo);
}

TEST(GroundTruth, BundledToyDatasetLoads) {
  const GroundTruthSet gt = GroundTruthSet::load(testutil::data("toy_flowers_gt.json"));
  EXPECT_EQ(gt.images().size(), 8u);
  EXPECT_EQ(gt.annotations().size(), 39u);
}

TEST(PredictionCache, SingleLineGivesOneEntry) {
  std::istringstream in(
      R"({"image_id": 1, "prompt": "a yellow flower", "detections": [{"bbox": [0, 0, 10, 10], "score": 0.9}, {"bbox": [5, 5, 10, 10], "score": 0.3}]})"
      "\n");
  const DetectionSet set = DetectionSet::from_jsonl(in);
  ASSERT_EQ(set.size(), 1u);
  const auto* boxes = set.find(1, "a yellow flower");
  ASSERT_NE(boxes, nullptr);
  ASSERT_EQ(boxes->size(), 2u);
  EXPECT_DOUBLE_EQ((*boxes)[1].score, 0.3);
  EXPECT_EQ(set.find(1, "a flower"), nullptr);
  EXPECT_TRUE(set.has_prompt("a yellow flower"));
}

TEST(PredictionCache, ScoreOutOfRangeRejected) {
  std::istringstream in(
      R"({"image_id": 1, "prompt": "p", "detections": [{"bbox": [0, 0, 10, 10], "score": 1.7}]})");
  EXPECT_EQ(error_code([&] { DetectionSet::from_jsonl(in); }),
            ErrorCode::kScoreOutOfRange);
  DetectionSet set;
  EXPECT_EQ(error_code([&] { set.set(1, "p", {{{0, 0, 0, 3}, 0.5}}); }),
            ErrorCode::kZeroAreaBox);
}

TEST(PredictionCache, EmptyFileIsEmptySet) {
  std::istringstream in("");
  EXPECT_TRUE(DetectionSet::from_jsonl(in).empty());
  std::istringstream bad("{not json}\n");
  EXPECT_EQ(error_code([&] { DetectionSet::from_jsonl(bad); }),
            ErrorCode::kParseError);
}

TEST(PredictionCache, DuplicateKeyLastWinsWithWarning) {
  std::istringstream in(
      R"({"image_id": 1, "prompt": "p", "detections": [{"bbox": [0, 0, 10, 10], "score": 0.1}]})"
      "\n"
      R"({"image_id": 1, "prompt": "p", "detections": []})"
      "\n");
  const DetectionSet set = DetectionSet::from_jsonl(in);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_TRUE(set.find(1, "p")->empty());
  EXPECT_EQ(set.warnings().size(), 1u);
}

TEST(PredictionCache, UnknownImageDetected) {
  const GroundTruthSet gt = GroundTruthSet::from_json(two_image_doc());
  DetectionSet set;
  set.set(3, "p", {});
  EXPECT_EQ(error_code([&] { set.validate_images(gt); }), ErrorCode::kUnknownImage);
}

DetectionSet random_set(std::mt19937_64& rng) {
  DetectionSet set;
  std::uniform_int_distribution<int> n(0, 5), coord(0, 90), size(1, 40), pct(0, 100);
  const int entries = n(rng) + 1;
  for (int e = 0; e < entries; ++e) {
    std::vector<ScoredBox> boxes;
    const int count = n(rng);
    for (int b = 0; b < count; ++b) {
      boxes.push_back({{static_cast<double>(coord(rng)), coord(rng) + 0.25,
                        static_cast<double>(size(rng)), size(rng) + 0.5},
                       pct(rng) / 100.0});
    }
    set.set(n(rng), "prompt " + std::to_string(n(rng)), std::move(boxes));
  }
  return set;
}

TEST(PredictionCacheProperty, RoundTripIsAFixedPoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const DetectionSet set = random_set(rng);
    const std::string text = set.to_jsonl();
    std::istringstream in(text);
    const DetectionSet back = DetectionSet::from_jsonl(in);
    EXPECT_EQ(back, set);
    EXPECT_EQ(back.to_jsonl(), text);
  }
}

TEST(PredictionCacheProperty, LineOrderDoesNotMatter) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const DetectionSet set = random_set(rng);
    std::vector<std::string> lines;
    std::istringstream all(set.to_jsonl());
    for (std::string line; std::getline(all, line);) lines.push_back(line);
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string shuffled;
    for (const auto& l : lines) shuffled += l + "\n";
    std::istringstream in(shuffled);
    EXPECT_EQ(DetectionSet::from_jsonl(in), set);
  }
}

}  // namespace
}  // namespace promptaxis
