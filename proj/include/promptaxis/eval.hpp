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

// Single-class detection metrics: IoU, greedy COCO-style matching,
// 101-point interpolated AP@IoU, PR/F1 curves, and F1-max calibration.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptaxis/detection.hpp"

namespace promptaxis {

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct PredictionMatch {
  double score = 0;
  bool is_tp = false;
  std::optional<std::int64_t> ann_id;
  // Position in the caller's prediction list.
  std::size_t source_index = 0;
};

struct MatchResult {
  // Sorted by score descending; equal scores keep input order.
  std::vector<PredictionMatch> predictions;
  std::size_t gt_count = 0;
  std::size_t fn_count = 0;
};

// Stable descending-score order of `preds`.
inline std::vector<std::size_t> score_order(std::span<const ScoredBox> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });
  return order;
}

// Greedy per-image matching: each prediction, in score order, claims the
// unmatched ground-truth box with the highest IoU >= iou_thresh (lowest
// index on IoU ties); otherwise it is a false positive.
inline MatchResult match_at_iou(std::span<const ScoredBox> preds,
                                std::span<const GtAnnotation> gts,
                                double iou_thresh = 0.5) {
  MatchResult result;
  result.gt_count = gts.size();
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t p : score_order(preds)) {
    PredictionMatch m;
    m.score = preds[p].score;
    m.source_index = p;
    double best = iou_thresh;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(preds[p].box, gts[g].box);
      if (v >= best && (!best_gt || v > best)) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt) {
      taken[*best_gt] = true;
      m.is_tp = true;
      m.ann_id = gts[*best_gt].id;
    }
    result.predictions.push_back(m);
  }
  result.fn_count = static_cast<std::size_t>(
      std::count(taken.begin(), taken.end(), false));
  return result;
}

struct RankedPrediction {
  double score = 0;
  bool is_tp = false;
};

// Concatenates per-image results in the given order, then stable-sorts by
// descending score.
inline std::vector<RankedPrediction> pool_matches(
    std::span<const MatchResult> per_image) {
  std::vector<RankedPrediction> pooled;
  for (const auto& m : per_image) {
    for (const auto& p : m.predictions) pooled.push_back({p.score, p.is_tp});
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const RankedPrediction& a, const RankedPrediction& b) {
                     return a.score > b.score;
                   });
  return pooled;
}

struct ApResult {
  double ap = 0;
  // Set when the dataset holds no ground truth; AP is then 1 with no
  // predictions and 0 otherwise.
  bool degenerate = false;
};

inline constexpr int kRecallPoints = 101;

// 101-point interpolated AP over a ranked pool.
inline ApResult average_precision_ranked(std::span<const RankedPrediction> ranked,
                                         std::size_t num_gt) {
  if (num_gt == 0) return {ranked.empty() ? 1.0 : 0.0, true};
  const std::size_t n = ranked.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ranked[i].is_tp ? ++tp : ++fp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0;
  for (int k = 0; k < kRecallPoints; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return {sum / kRecallPoints, false};
}

inline ApResult average_precision(std::span<const MatchResult> per_image) {
  std::size_t num_gt = 0;
  for (const auto& m : per_image) num_gt += m.gt_count;
  auto pooled = pool_matches(per_image);
  return average_precision_ranked(pooled, num_gt);
}

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct F1Point {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct Calibration {
  double threshold = 1.0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool no_detections = false;
};

struct EvalOptions {
  double iou_threshold = 0.5;
  // Per-image cap on predictions by score; unset keeps everything.
  std::optional<std::size_t> max_dets;
  // map_at_50 raises UnknownPrompt when the prompt has no entries at all.
  bool strict = false;
};

struct EvalResult {
  double map_at_50 = 0;
  bool degenerate = false;
  std::vector<PrPoint> pr_points;
  // One point per distinct score, thresholds descending.
  std::vector<F1Point> f1_curve;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t num_gt = 0, num_predictions = 0;

  json to_json() const {
    json pr = json::array();
    for (const auto& p : pr_points) pr.push_back({p.recall, p.precision});
    json f1 = json::array();
    for (const auto& p : f1_curve) {
      f1.push_back({{"threshold", p.threshold},
                    {"precision", p.precision},
                    {"recall", p.recall},
                    {"f1", p.f1}});
    }
    return {{"map_at_50", map_at_50}, {"degenerate", degenerate},
            {"tp", tp},               {"fp", fp},
            {"fn", fn},               {"num_gt", num_gt},
            {"num_predictions", num_predictions},
            {"pr_points", std::move(pr)},
            {"f1_curve", std::move(f1)}};
  }
};

inline std::string f1_curve_csv(std::span<const F1Point> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,precision,recall,f1\n";
  for (const auto& p : curve) {
    out << p.threshold << ',' << p.precision << ',' << p.recall << ',' << p.f1
        << '\n';
  }
  return out.str();
}

inline double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall)
                                : 0.0;
}

// Highest F1 over the curve; ties go to the highest threshold.
inline Calibration select_f1_max(std::span<const F1Point> curve) {
  Calibration best;
  if (curve.empty()) {
    best.no_detections = true;
    return best;
  }
  const F1Point* pick = &curve.front();
  for (const auto& p : curve) {
    if (p.f1 > pick->f1) pick = &p;
  }
  return {pick->threshold, pick->precision, pick->recall, pick->f1, false};
}

using PredictionsByImage = std::map<ImageId, std::vector<ScoredBox>>;

// Evaluates one prompt's predictions against every image in `gt`. Images
// missing from `preds` count as having no predictions.
inline EvalResult evaluate_predictions(const PredictionsByImage& preds,
                                       const GroundTruthSet& gt,
                                       const EvalOptions& opts = {}) {
  for (const auto& [image_id, _] : preds) {
    if (!gt.has_image(image_id)) {
      throw Error(ErrorCode::kUnknownImage,
                  "prediction for image " + std::to_string(image_id) +
                      " not in ground truth");
    }
  }
  std::vector<MatchResult> per_image;
  per_image.reserve(gt.images().size());
  for (const auto& img : gt.images()) {
    std::vector<ScoredBox> boxes;
    if (auto it = preds.find(img.id); it != preds.end()) boxes = it->second;
    if (opts.max_dets && boxes.size() > *opts.max_dets) {
      std::vector<ScoredBox> kept;
      for (std::size_t i : score_order(boxes)) {
        if (kept.size() == *opts.max_dets) break;
        kept.push_back(boxes[i]);
      }
      boxes = std::move(kept);
    }
    auto gts = gt.annotations_for(img.id);
    per_image.push_back(match_at_iou(boxes, gts, opts.iou_threshold));
  }

  EvalResult result;
  for (const auto& m : per_image) result.num_gt += m.gt_count;
  auto ranked = pool_matches(per_image);
  auto ap = average_precision_ranked(ranked, result.num_gt);
  result.map_at_50 = ap.ap;
  result.degenerate = ap.degenerate;
  result.num_predictions = ranked.size();

  // Greedy matching makes each score-filtered match a prefix of the full
  // one, so cumulative counts at the last prediction of each score group
  // equal a rematch at that threshold.
  std::size_t tp = 0, fp = 0;
  const double denom_gt = static_cast<double>(result.num_gt);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ranked[i].is_tp ? ++tp : ++fp;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = result.num_gt ? static_cast<double>(tp) / denom_gt : 0.0;
    result.pr_points.push_back({recall, precision});
    if (i + 1 == ranked.size() || ranked[i + 1].score != ranked[i].score) {
      // F1 from integer counts: equal ratios give bit-identical doubles, so
      // the highest-threshold tie rule in select_f1_max is exact.
      const std::size_t fn = result.num_gt - tp;
      const double f1 = tp == 0 ? 0.0
                                : static_cast<double>(2 * tp) /
                                      static_cast<double>(2 * tp + fp + fn);
      result.f1_curve.push_back({ranked[i].score, precision, recall, f1});
    }
  }
  result.tp = tp;
  result.fp = fp;
  result.fn = result.num_gt - tp;
  return result;
}

inline PredictionsByImage predictions_for_prompt(const DetectionSet& det,
                                                 const std::string& prompt,
                                                 bool strict) {
  if (strict && !det.has_prompt(prompt)) {
    throw Error(ErrorCode::kUnknownPrompt, "\"" + prompt + "\"");
  }
  PredictionsByImage out;
  for (const auto& [key, boxes] : det.entries()) {
    if (key.second == prompt) out[key.first] = boxes;
  }
  return out;
}

inline EvalResult map_at_50(const DetectionSet& det, const GroundTruthSet& gt,
                            const std::string& prompt,
                            const EvalOptions& opts = {}) {
  return evaluate_predictions(predictions_for_prompt(det, prompt, opts.strict),
                              gt, opts);
}

inline Calibration f1_max_threshold(const DetectionSet& det,
                                    const GroundTruthSet& gt,
                                    const std::string& prompt,
                                    double iou_thresh = 0.5) {
  EvalOptions opts;
  opts.iou_threshold = iou_thresh;
  return select_f1_max(map_at_50(det, gt, prompt, opts).f1_curve);
}

}  // namespace promptaxis
