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

// Phase 1 -> Phase 2 -> calibration orchestration over one
// (backend, dataset, axes) triple, with every trial appended to a ledger.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "promptaxis/axis.hpp"
#include "promptaxis/backend.hpp"
#include "promptaxis/eval.hpp"
#include "promptaxis/ledger.hpp"
#include "promptaxis/mock_backend.hpp"
#include "promptaxis/plan.hpp"
#include "promptaxis/remote_backend.hpp"

namespace promptaxis {

struct RunConfig {
  std::string axes_path;
  std::string gt_path;
  // "cached:<path>", "remote:<url>" or "mock:<fixture>". Falls back to
  // cached:<predictions_path> when empty.
  std::string backend;
  std::string predictions_path;
  // Defaults to the ground-truth file stem.
  std::string dataset_id;
  Phase2Config phase2;
  double iou_threshold = 0.5;
  std::optional<std::size_t> max_dets;
  std::uint64_t seed = 0;
  // Append the "" background absorber when the backend supports it.
  bool background_class = true;
  std::string out_dir = "out";
  bool resume = false;

  static RunConfig from_json(const json& j) {
    RunConfig c;
    try {
      c.axes_path = j.value("axes", c.axes_path);
      c.gt_path = j.value("gt", c.gt_path);
      c.backend = j.value("backend", c.backend);
      c.predictions_path = j.value("predictions", c.predictions_path);
      c.dataset_id = j.value("dataset_id", c.dataset_id);
      c.phase2.top_n_for_negation = j.value("top_n", c.phase2.top_n_for_negation);
      c.phase2.include_emoji_stage =
          j.value("include_emoji_stage", c.phase2.include_emoji_stage);
      c.iou_threshold = j.value("iou", c.iou_threshold);
      if (j.contains("max_dets") && !j["max_dets"].is_null()) {
        c.max_dets = j["max_dets"].get<std::size_t>();
      }
      c.seed = j.value("seed", c.seed);
      c.background_class = j.value("background_class", c.background_class);
      c.out_dir = j.value("out", c.out_dir);
      c.resume = j.value("resume", c.resume);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, e.what());
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
    try {
      return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
  }

  json to_json() const {
    return {{"axes", axes_path},
            {"gt", gt_path},
            {"backend", backend},
            {"predictions", predictions_path},
            {"dataset_id", dataset_id},
            {"top_n", phase2.top_n_for_negation},
            {"include_emoji_stage", phase2.include_emoji_stage},
            {"iou", iou_threshold},
            {"max_dets", max_dets ? json(*max_dets) : json(nullptr)},
            {"seed", seed},
            {"background_class", background_class},
            {"out", out_dir},
            {"resume", resume}};
  }

  std::string effective_backend() const {
    if (!backend.empty()) return backend;
    if (!predictions_path.empty()) return "cached:" + predictions_path;
    return "";
  }

  void validate() const {
    phase2.validate();
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "iou must be in (0, 1]");
    }
    if (max_dets && *max_dets == 0) {
      throw Error(ErrorCode::kInvalidConfig, "max_dets must be positive");
    }
    for (const auto& [what, path] :
         {std::pair{"axes", axes_path}, std::pair{"gt", gt_path}}) {
      if (path.empty()) throw Error(ErrorCode::kInvalidConfig, std::string(what) + " path not set");
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::kInvalidConfig, std::string(what) + " file not found: " + path);
      }
    }
    const std::string b = effective_backend();
    if (b.empty()) throw Error(ErrorCode::kInvalidConfig, "no backend configured");
    auto colon = b.find(':');
    const std::string kind = b.substr(0, colon);
    if (colon == std::string::npos || (kind != "cached" && kind != "mock" && kind != "remote")) {
      throw Error(ErrorCode::kInvalidConfig,
                  "backend must be cached:<path>, remote:<url> or mock:<fixture>");
    }
    if (kind != "remote" && !std::filesystem::exists(b.substr(colon + 1))) {
      throw Error(ErrorCode::kInvalidConfig, "backend file not found: " + b.substr(colon + 1));
    }
  }
};

// Builds the backend named by `spec`. Mock fixtures take their ground truth
// from `gt` and have `seed` folded into their own seed.
inline std::shared_ptr<const Backend> make_backend(const std::string& spec,
                                                   const GroundTruthSet& gt,
                                                   std::uint64_t seed,
                                                   RemoteOptions remote = {}) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "bad backend spec " + spec);
  }
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind == "cached") {
    DetectionSet cache = DetectionSet::load(arg);
    cache.validate_images(gt);
    return std::make_shared<CachedBackend>(
        std::move(cache), std::filesystem::path(arg).stem().string());
  }
  if (kind == "mock") {
    MockConfig cfg = MockConfig::load(arg);
    cfg.seed ^= seed;
    return std::make_shared<MockBackend>(std::move(cfg), gt);
  }
  if (kind == "remote") {
    return std::make_shared<RemoteBackend>(RemoteBackend::connect(arg, remote));
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown backend kind " + kind);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct RunContext {
  RunConfig config;
  AxisSet axes;
  GroundTruthSet gt;
  std::shared_ptr<const Backend> backend;
  std::string dataset_id;
  // Identifies everything a trial's score depends on.
  std::string config_hash;

  EvalOptions eval_options() const {
    EvalOptions o;
    o.iou_threshold = config.iou_threshold;
    o.max_dets = config.max_dets;
    return o;
  }
};

inline std::string compute_config_hash(const RunConfig& config, const AxisSet& axes,
                                       const GroundTruthSet& gt,
                                       const std::string& dataset_id,
                                       const std::string& backend_name) {
  json key = {{"axes", axes.to_json()},
              {"backend", config.effective_backend()},
              {"backend_name", backend_name},
              {"dataset", dataset_id},
              {"gt", hex64(detail::fnv1a(gt.to_json().dump()))},
              {"iou", config.iou_threshold},
              {"max_dets", config.max_dets ? json(*config.max_dets) : json(nullptr)},
              {"seed", config.seed},
              {"background_class", config.background_class}};
  return hex64(detail::fnv1a(key.dump()));
}

inline RunContext make_context(const RunConfig& config,
                               std::shared_ptr<const Backend> backend = nullptr) {
  config.validate();
  AxisSet axes = AxisSet::load(config.axes_path);
  GroundTruthSet gt = GroundTruthSet::load(config.gt_path);
  std::string dataset_id = config.dataset_id.empty()
                               ? std::filesystem::path(config.gt_path).stem().string()
                               : config.dataset_id;
  if (!backend) backend = make_backend(config.effective_backend(), gt, config.seed);
  std::string hash = compute_config_hash(config, axes, gt, dataset_id,
                                         backend->descriptor().name);
  return RunContext{config, std::move(axes), std::move(gt), std::move(backend),
                    std::move(dataset_id), std::move(hash)};
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

// Detects `prompt` on every ground-truth image and scores it.
inline EvalResult evaluate_prompt(const RunContext& ctx, const std::string& prompt) {
  const auto& images = ctx.gt.images();
  std::vector<std::vector<ScoredBox>> per_image(images.size());
  parallel_for(images.size(), ctx.backend->descriptor().max_concurrency,
               [&](std::size_t i) {
                 ImageRef ref{images[i].id, images[i].file_name};
                 const bool bg = ctx.config.background_class &&
                                 ctx.backend->descriptor().supports_background_class;
                 per_image[i] = detect_single_prompt(*ctx.backend, ref, prompt, bg);
               });
  PredictionsByImage preds;
  for (std::size_t i = 0; i < images.size(); ++i) {
    preds[images[i].id] = std::move(per_image[i]);
  }
  return evaluate_predictions(preds, ctx.gt, ctx.eval_options());
}

struct TrialPlan {
  std::string trial_id;
  Phase phase;
  PromptSpec spec;
  std::string sweep_label;
  std::string axis_label;
  std::string level_label;
};

// Evaluates one trial, or reuses an ok record on resume. Backend and data
// errors become a failed record instead of propagating.
inline TrialRecord run_trial(const RunContext& ctx, Ledger& ledger,
                             const TrialPlan& plan,
                             std::optional<double> baseline_map) {
  if (ctx.config.resume) {
    if (const TrialRecord* prior =
            ledger.find_ok(ctx.config_hash, plan.phase, plan.spec.fingerprint())) {
      return *prior;
    }
  }
  TrialRecord r;
  r.trial_id = plan.trial_id;
  r.phase = plan.phase;
  r.sweep_label = plan.sweep_label;
  r.axis_label = plan.axis_label;
  r.level_label = plan.level_label;
  r.fingerprint = plan.spec.fingerprint();
  r.prompt = render_prompt(plan.spec, ctx.axes).text;
  r.backend = ctx.backend->descriptor().name;
  r.dataset = ctx.dataset_id;
  r.config_hash = ctx.config_hash;
  try {
    r.map_at_50 = evaluate_prompt(ctx, r.prompt).map_at_50;
    // No baseline_map means this trial is the baseline itself.
    r.delta_vs_baseline = baseline_map ? *r.map_at_50 - *baseline_map : 0.0;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.timestamp = utc_timestamp();
  ledger.append(r);
  return r;
}

inline std::string trial_id(std::string_view prefix, std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return std::string(prefix) + "-" + buf;
}

struct Phase1Outcome {
  std::vector<TrialRecord> records;
  double baseline_map = 0;
  ScoreTable scores;
  std::set<std::string> failed;
};

// Refuses to append a fresh run onto a ledger that already holds rows.
inline void check_fresh_or_resume(const RunContext& ctx, const Ledger& ledger,
                                  Phase phase) {
  if (ctx.config.resume) return;
  for (const auto& r : ledger.trials()) {
    if (r.config_hash == ctx.config_hash && r.phase == phase) {
      throw Error(ErrorCode::kInvalidConfig,
                  "ledger already holds " + std::string(phase_name(phase)) +
                      " trials for this configuration; pass --resume or use a new --out");
    }
  }
}

inline Phase1Outcome run_phase1(const RunContext& ctx, Ledger& ledger) {
  check_fresh_or_resume(ctx, ledger, Phase::kPhase1);
  const Phase1Plan plan = generate_ofat(ctx.axes);
  Phase1Outcome out;
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const auto& entry = plan.entries[i];
    std::string level;
    if (auto axis = parse_axis(entry.label)) {
      level = level_label(ctx.axes, *axis, entry.spec.level(*axis));
    }
    TrialPlan tp{trial_id("phase1", i), Phase::kPhase1, entry.spec, "",
                 entry.label, level};
    std::optional<double> base =
        i == 0 ? std::nullopt : std::optional<double>(out.baseline_map);
    TrialRecord r = run_trial(ctx, ledger, tp, base);
    if (i == 0) {
      if (!r.ok) throw Error(ErrorCode::kBaselineFailed, r.error);
      out.baseline_map = *r.map_at_50;
    }
    if (r.ok) {
      out.scores[r.fingerprint] = *r.map_at_50;
    } else {
      out.failed.insert(r.fingerprint);
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

// Phase-1 scores for this configuration, recovered from the ledger.
inline Phase1Outcome phase1_from_ledger(const RunContext& ctx, const Ledger& ledger) {
  Phase1Outcome out;
  const std::string base_fp = PromptSpec::baseline().fingerprint();
  bool have_baseline = false;
  for (const auto& r : ledger.latest_trials()) {
    if (r.config_hash != ctx.config_hash || r.phase != Phase::kPhase1) continue;
    if (r.ok) {
      out.scores[r.fingerprint] = *r.map_at_50;
      out.failed.erase(r.fingerprint);
      if (r.fingerprint == base_fp) {
        out.baseline_map = *r.map_at_50;
        have_baseline = true;
      }
    } else {
      out.failed.insert(r.fingerprint);
    }
    out.records.push_back(r);
  }
  if (!have_baseline) {
    throw Error(ErrorCode::kMissingScore,
                "no phase1 baseline for this configuration in the ledger; run phase1 first");
  }
  return out;
}

struct Phase2Outcome {
  std::vector<TrialRecord> records;
  std::optional<TrialRecord> best;
};

inline std::vector<ScoredSpec> ok_scores(const std::vector<TrialRecord>& records) {
  std::vector<ScoredSpec> out;
  for (const auto& r : records) {
    if (r.ok) out.push_back({PromptSpec::from_fingerprint(r.fingerprint), *r.map_at_50});
  }
  return out;
}

inline Phase2Outcome run_phase2(const RunContext& ctx, Ledger& ledger,
                                const Phase1Outcome& phase1) {
  ctx.config.phase2.validate();
  check_fresh_or_resume(ctx, ledger, Phase::kPhase2Base);
  const Phase2Plan plan = generate_phase2_base(ctx.axes, phase1.scores, phase1.failed);
  Phase2Outcome out;
  const std::optional<double> base_map = phase1.baseline_map;

  std::vector<TrialRecord> base;
  for (std::size_t i = 0; i < plan.base.size(); ++i) {
    TrialPlan tp{trial_id("phase2_base", i), Phase::kPhase2Base, plan.base[i].spec,
                 plan.base[i].label, "", ""};
    base.push_back(run_trial(ctx, ledger, tp, base_map));
  }

  // Stage barrier: negation candidates come from settled base results only.
  const auto ranked_base = rank_results(ok_scores(base));
  std::vector<TrialRecord> negation;
  const auto neg_specs =
      expand_negation(ranked_base, ctx.axes, ctx.config.phase2.top_n_for_negation);
  for (std::size_t i = 0; i < neg_specs.size(); ++i) {
    TrialPlan tp{trial_id("phase2_negation", i), Phase::kPhase2Negation,
                 neg_specs[i], "negation", "", ""};
    negation.push_back(run_trial(ctx, ledger, tp, base_map));
  }

  std::vector<TrialRecord> emoji;
  if (ctx.config.phase2.include_emoji_stage) {
    std::vector<TrialRecord> pool = base;
    pool.insert(pool.end(), negation.begin(), negation.end());
    const auto ranked = rank_results(ok_scores(pool));
    if (!ranked.empty()) {
      const auto emoji_specs = expand_emoji(ranked.front().spec, ctx.axes);
      for (std::size_t i = 0; i < emoji_specs.size(); ++i) {
        TrialPlan tp{trial_id("phase2_emoji", i), Phase::kPhase2Emoji,
                     emoji_specs[i], "emoji", "", ""};
        emoji.push_back(run_trial(ctx, ledger, tp, base_map));
      }
    }
  }

  out.records = std::move(base);
  out.records.insert(out.records.end(), negation.begin(), negation.end());
  out.records.insert(out.records.end(), emoji.begin(), emoji.end());
  const auto ranked_all = rank_results(ok_scores(out.records));
  if (!ranked_all.empty()) {
    const std::string fp = ranked_all.front().spec.fingerprint();
    for (const auto& r : out.records) {
      if (r.ok && r.fingerprint == fp) {
        out.best = r;
        break;
      }
    }
  }
  return out;
}

// F1-max threshold for `prompt` on the context's dataset, appended to the
// ledger.
inline CalibrationRecord calibrate(const RunContext& ctx, Ledger& ledger,
                                   const std::string& prompt) {
  EvalResult res = evaluate_prompt(ctx, prompt);
  CalibrationRecord rec;
  rec.prompt = prompt;
  rec.backend = ctx.backend->descriptor().name;
  rec.dataset = ctx.dataset_id;
  rec.config_hash = ctx.config_hash;
  rec.result = select_f1_max(res.f1_curve);
  rec.curve = res.f1_curve;
  rec.timestamp = utc_timestamp();
  ledger.append(rec);
  return rec;
}

}  // namespace promptaxis
