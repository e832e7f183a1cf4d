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
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace promptaxis {
namespace {

using testutil::error_code;

constexpr int kRandomScenes = 1500;

GroundTruthSet one_image_gt(std::vector<BBox> boxes) {
  std::vector<GtAnnotation> anns;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    anns.push_back({static_cast<std::int64_t>(i + 1), 1, boxes[i]});
  }
  return {{{1, "a.png", 1000, 1000}}, anns, "flower"};
}

EvalResult eval_one(const GroundTruthSet& gt, std::vector<ScoredBox> preds) {
  return evaluate_predictions({{1, std::move(preds)}}, gt);
}

TEST(Iou, ExactValues) {
  EXPECT_EQ(iou({0, 0, 2, 1}, {1, 0, 2, 1}), 1.0 / 3.0);
  // Corners (0,0)-(10,10) and (5,0)-(15,10).
  EXPECT_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 1.0 / 3.0);
  EXPECT_EQ(iou({3, 4, 5, 6}, {3, 4, 5, 6}), 1.0);
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 1, 1}), 0.0);
  // Touching edges share no area.
  EXPECT_EQ(iou({0, 0, 1, 1}, {1, 0, 1, 1}), 0.0);
}

TEST(Matching, HigherScoreClaimsFirst) {
  const std::vector<GtAnnotation> gts{{1, 1, {0, 0, 10, 10}}};
  const std::vector<ScoredBox> preds{{{0, 0, 10, 10}, 0.3}, {{1, 0, 10, 10}, 0.8}};
  const MatchResult m = match_at_iou(preds, gts);
  ASSERT_EQ(m.predictions.size(), 2u);
  EXPECT_EQ(m.predictions[0].source_index, 1u);
  EXPECT_TRUE(m.predictions[0].is_tp);
  EXPECT_FALSE(m.predictions[1].is_tp);
  EXPECT_EQ(m.fn_count, 0u);
}

TEST(Matching, BestIouWinsAndTiesGoToLowestIndex) {
  const std::vector<GtAnnotation> gts{
      {1, 1, {0, 0, 10, 10}}, {2, 1, {2, 0, 10, 10}}, {3, 1, {-2, 0, 10, 10}}};
  const std::vector<ScoredBox> best{{{2, 0, 10, 10}, 0.5}};
  EXPECT_EQ(match_at_iou(best, gts).predictions[0].ann_id, 2);
  // Equidistant from GT 2 and GT 3, GT 1 taken first.
  const std::vector<ScoredBox> tie{{{0, 0, 10, 10}, 0.9}, {{0, 0, 10, 10}, 0.5}};
  const MatchResult m = match_at_iou(tie, gts);
  EXPECT_EQ(m.predictions[0].ann_id, 1);
  EXPECT_EQ(m.predictions[1].ann_id, 2);
  EXPECT_EQ(m.fn_count, 1u);
}

TEST(Matching, BelowThresholdIsFalsePositive) {
  const std::vector<GtAnnotation> gts{{1, 1, {0, 0, 10, 10}}};
  const std::vector<ScoredBox> preds{{{5, 0, 10, 10}, 0.9}};
  EXPECT_FALSE(match_at_iou(preds, gts, 0.5).predictions[0].is_tp);
  EXPECT_TRUE(match_at_iou(preds, gts, 0.3).predictions[0].is_tp);
}

TEST(AveragePrecision, HalfRecallAtFullPrecision) {
  const auto gt = one_image_gt({{0, 0, 10, 10}, {100, 100, 10, 10}});
  const auto r = eval_one(gt, {{{0, 0, 10, 10}, 0.7}});
  EXPECT_NEAR(r.map_at_50, 51.0 / 101.0, 1e-12);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fn, 1u);
}

TEST(AveragePrecision, PerfectAndWorthless) {
  const auto gt = one_image_gt({{0, 0, 10, 10}, {100, 100, 10, 10}});
  EXPECT_DOUBLE_EQ(
      eval_one(gt, {{{0, 0, 10, 10}, 0.7}, {{100, 100, 10, 10}, 0.2}}).map_at_50, 1.0);
  EXPECT_DOUBLE_EQ(eval_one(gt, {{{500, 500, 10, 10}, 0.7}}).map_at_50, 0.0);
  EXPECT_DOUBLE_EQ(eval_one(gt, {}).map_at_50, 0.0);
}

TEST(AveragePrecision, NoGroundTruthIsDegenerate) {
  const GroundTruthSet gt({{1, "a.png", 100, 100}}, {}, "flower");
  const auto empty = eval_one(gt, {});
  EXPECT_TRUE(empty.degenerate);
  EXPECT_DOUBLE_EQ(empty.map_at_50, 1.0);
  const auto some = eval_one(gt, {{{0, 0, 5, 5}, 0.5}});
  EXPECT_TRUE(some.degenerate);
  EXPECT_DOUBLE_EQ(some.map_at_50, 0.0);
}

TEST(AveragePrecision, MaxDetsKeepsTopScores) {
  const auto gt = one_image_gt({{0, 0, 10, 10}});
  EvalOptions opts;
  opts.max_dets = 1;
  const PredictionsByImage preds{{1, {{{50, 50, 5, 5}, 0.9}, {{0, 0, 10, 10}, 0.8}}}};
  EXPECT_DOUBLE_EQ(evaluate_predictions(preds, gt, opts).map_at_50, 0.0);
  opts.max_dets = 2;
  EXPECT_GT(evaluate_predictions(preds, gt, opts).map_at_50, 0.0);
}

TEST(AveragePrecision, UnknownImageAndPrompt) {
  const auto gt = one_image_gt({{0, 0, 10, 10}});
  const PredictionsByImage stray{{5, {}}};
  EXPECT_EQ(error_code([&] { evaluate_predictions(stray, gt); }),
            ErrorCode::kUnknownImage);
  DetectionSet det;
  det.set(1, "a flower", {});
  EvalOptions strict;
  strict.strict = true;
  EXPECT_EQ(error_code([&] { map_at_50(det, gt, "a rose", strict); }),
            ErrorCode::kUnknownPrompt);
  EXPECT_NO_THROW(map_at_50(det, gt, "a rose"));
}

TEST(AveragePrecision, MixedFixtureMatchesOracle) {
  const auto gt = GroundTruthSet::load(testutil::fixture("mixed_scene_gt.json"));
  const auto det = DetectionSet::load(testutil::fixture("mixed_scene_preds.jsonl"));
  const auto images = testutil::to_oracle(gt, det, "a flower");
  for (double thresh : {0.3, 0.5, 0.75}) {
    EvalOptions opts;
    opts.iou_threshold = thresh;
    EXPECT_NEAR(map_at_50(det, gt, "a flower", opts).map_at_50,
                oracle::average_precision(images, thresh), 1e-12)
        << "iou " << thresh;
  }
}

TEST(AveragePrecisionProperty, AgreesWithOracleOnRandomScenes) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < kRandomScenes; ++trial) {
    const auto scene = testutil::random_scene(rng);
    const auto gt = scene.ground_truth();
    const auto det = scene.detections("p");
    for (double thresh : {0.5, 0.3}) {
      EvalOptions opts;
      opts.iou_threshold = thresh;
      const double got = map_at_50(det, gt, "p", opts).map_at_50;
      const double want = oracle::average_precision(scene.images, thresh);
      ASSERT_NEAR(got, want, 1e-9) << "scene " << trial << " iou " << thresh;
    }
  }
}

TEST(AveragePrecisionProperty, BoundedAndDeterministic) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto scene = testutil::random_scene(rng);
    const auto gt = scene.ground_truth();
    const auto det = scene.detections("p");
    const auto a = map_at_50(det, gt, "p");
    EXPECT_GE(a.map_at_50, 0.0);
    EXPECT_LE(a.map_at_50, 1.0);
    EXPECT_EQ(a.map_at_50, map_at_50(det, gt, "p").map_at_50);
    EXPECT_EQ(a.tp + a.fn, a.num_gt);
  }
}

// Reorders predictions inside each image after making every score unique.
TEST(AveragePrecisionProperty, PredictionOrderIrrelevantForDistinctScores) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    auto scene = testutil::random_scene(rng);
    double s = 0.999;
    for (auto& img : scene.images) {
      for (auto& p : img.preds) {
        p.score = s;
        s -= 0.001;
      }
    }
    const auto gt = scene.ground_truth();
    const double before = map_at_50(scene.detections("p"), gt, "p").map_at_50;
    for (auto& img : scene.images) std::shuffle(img.preds.begin(), img.preds.end(), rng);
    EXPECT_EQ(map_at_50(scene.detections("p"), gt, "p").map_at_50, before);
  }
}

TEST(AveragePrecisionProperty, DroppingFalsePositivesNeverLowersAp) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    auto scene = testutil::random_scene(rng);
    const auto gt = scene.ground_truth();
    const double before = map_at_50(scene.detections("p"), gt, "p").map_at_50;
    for (std::size_t i = 0; i < scene.images.size(); ++i) {
      std::set<std::size_t> fps;
      for (const auto& o : oracle::match_image(scene.images[i], i, 0.5)) {
        if (!o.tp) fps.insert(o.index);
      }
      std::vector<oracle::Pred> kept;
      for (std::size_t p = 0; p < scene.images[i].preds.size(); ++p) {
        if (!fps.count(p)) kept.push_back(scene.images[i].preds[p]);
      }
      scene.images[i].preds = kept;
    }
    EXPECT_GE(map_at_50(scene.detections("p"), gt, "p").map_at_50, before - 1e-12);
  }
}

TEST(AveragePrecisionProperty, TrailingDisjointFalsePositiveChangesNothing) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    auto scene = testutil::random_scene(rng);
    const auto gt = scene.ground_truth();
    const auto before = map_at_50(scene.detections("p"), gt, "p");
    if (before.degenerate) continue;
    scene.images[0].preds.push_back({{500, 500, 10, 10}, 0.0});
    EXPECT_EQ(map_at_50(scene.detections("p"), gt, "p").map_at_50, before.map_at_50);
  }
}

TEST(F1Calibration, TruePositiveAboveFalsePositive) {
  const auto gt = one_image_gt({{0, 0, 10, 10}});
  const auto r = eval_one(gt, {{{0, 0, 10, 10}, 0.9}, {{300, 300, 10, 10}, 0.2}});
  ASSERT_EQ(r.f1_curve.size(), 2u);
  const Calibration c = select_f1_max(r.f1_curve);
  EXPECT_DOUBLE_EQ(c.threshold, 0.9);
  EXPECT_DOUBLE_EQ(c.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.f1_curve[1].f1, 2.0 / 3.0);
}

TEST(F1Calibration, AllTruePositivesPickLowestScore) {
  const auto gt = one_image_gt({{0, 0, 10, 10}, {100, 0, 10, 10}, {200, 0, 10, 10}});
  const auto r = eval_one(
      gt, {{{0, 0, 10, 10}, 0.9}, {{100, 0, 10, 10}, 0.6}, {{200, 0, 10, 10}, 0.35}});
  const Calibration c = select_f1_max(r.f1_curve);
  EXPECT_DOUBLE_EQ(c.threshold, 0.35);
  EXPECT_DOUBLE_EQ(c.recall, 1.0);
}

TEST(F1Calibration, NoDetectionsGivesSentinel) {
  const auto gt = one_image_gt({{0, 0, 10, 10}});
  const Calibration c = select_f1_max(eval_one(gt, {}).f1_curve);
  EXPECT_TRUE(c.no_detections);
  EXPECT_DOUBLE_EQ(c.threshold, 1.0);
  EXPECT_DOUBLE_EQ(c.f1, 0.0);
}

TEST(F1Calibration, TiesGoToHighestThreshold) {
  // F1 is 2/3 at 0.8 (1 TP of 2 GT) and 2/3 at 0.4 (2 TP, 2 FP).
  const auto gt = one_image_gt({{0, 0, 10, 10}, {100, 0, 10, 10}});
  const auto r = eval_one(gt, {{{0, 0, 10, 10}, 0.8},
                               {{300, 300, 10, 10}, 0.6},
                               {{400, 300, 10, 10}, 0.5},
                               {{100, 0, 10, 10}, 0.4}});
  const Calibration c = select_f1_max(r.f1_curve);
  EXPECT_DOUBLE_EQ(c.threshold, 0.8);
  EXPECT_NEAR(c.f1, 2.0 / 3.0, 1e-12);
}

TEST(F1CalibrationProperty, CurveMatchesRematchAndMaximumIsGlobal) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto scene = testutil::random_scene(rng);
    const auto gt = scene.ground_truth();
    const auto r = map_at_50(scene.detections("p"), gt, "p");
    const Calibration c = select_f1_max(r.f1_curve);
    std::set<double> scores;
    for (const auto& img : scene.images) {
      for (const auto& p : img.preds) scores.insert(p.score);
    }
    ASSERT_EQ(r.f1_curve.size(), scores.size());
    if (scores.empty()) {
      EXPECT_TRUE(c.no_detections);
      continue;
    }
    for (const auto& point : r.f1_curve) {
      const auto want = oracle::prf_at(scene.images, 0.5, point.threshold);
      ASSERT_NEAR(point.precision, want.precision, 1e-12);
      ASSERT_NEAR(point.recall, want.recall, 1e-12);
      ASSERT_NEAR(point.f1, want.f1, 1e-12);
    }
    double best = 0, best_t = 0;
    for (double t : scores) {
      const double f = oracle::prf_at(scene.images, 0.5, t).f1;
      if (f > best + 1e-12 || (std::abs(f - best) <= 1e-12 && t > best_t)) {
        best = f;
        best_t = t;
      }
    }
    EXPECT_NEAR(c.f1, best, 1e-12) << "scene " << trial;
    if (best > 0) EXPECT_EQ(c.threshold, best_t) << "scene " << trial;
  }
}

}  // namespace
}  // namespace promptaxis
