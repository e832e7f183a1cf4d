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

// promptaxis command-line interface.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "promptaxis.hpp"

namespace fs = std::filesystem;
using namespace promptaxis;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string axes, gt, backend, predictions, dataset_id, out;
  int top_n = 3;
  double iou = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_dets = 0;
  bool resume = false;
  bool no_emoji = false;
  bool no_background = false;
  std::vector<CLI::Option*> opts;
  CLI::Option *axes_o, *gt_o, *backend_o, *pred_o, *dataset_o, *out_o, *top_n_o,
      *iou_o, *seed_o, *max_dets_o, *resume_o, *no_emoji_o, *no_bg_o;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "RunConfig JSON file; flags override it");
    axes_o = app->add_option("--axes", axes, "Axis definition JSON");
    gt_o = app->add_option("--gt", gt, "COCO annotation file");
    backend_o = app->add_option("--backend", backend,
                                "cached:<path> | remote:<url> | mock:<fixture>");
    pred_o = app->add_option("--predictions", predictions,
                             "Prediction cache (implies cached backend)");
    dataset_o = app->add_option("--dataset-id", dataset_id, "Dataset label in the ledger");
    out_o = app->add_option("--out", out, "Output directory");
    top_n_o = app->add_option("--top-n", top_n, "Base prompts that receive negation variants");
    iou_o = app->add_option("--iou", iou, "IoU match threshold");
    seed_o = app->add_option("--seed", seed, "Seed folded into mock backends");
    max_dets_o = app->add_option("--max-dets", max_dets, "Per-image prediction cap");
    resume_o = app->add_flag("--resume", resume, "Skip prompts already in the ledger");
    no_emoji_o = app->add_flag("--no-emoji", no_emoji, "Skip the emoji stage");
    no_bg_o = app->add_flag("--no-background", no_background,
                            "Do not append the \"\" background class");
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (*axes_o) c.axes_path = axes;
    if (*gt_o) c.gt_path = gt;
    if (*backend_o) c.backend = backend;
    if (*pred_o) c.predictions_path = predictions;
    if (*dataset_o) c.dataset_id = dataset_id;
    if (*out_o) c.out_dir = out;
    if (*top_n_o) c.phase2.top_n_for_negation = top_n;
    if (*iou_o) c.iou_threshold = iou;
    if (*seed_o) c.seed = seed;
    if (*max_dets_o) c.max_dets = max_dets;
    if (*resume_o) c.resume = resume;
    if (*no_emoji_o) c.phase2.include_emoji_stage = !no_emoji;
    if (*no_bg_o) c.background_class = !no_background;
    return c;
  }
};

fs::path ledger_path(const RunConfig& c) { return fs::path(c.out_dir) / "ledger.jsonl"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void print_best(const std::string& label, const TrialRecord& r) {
  std::cout << label << ": \"" << r.prompt << "\" mAP@0.5=" << *r.map_at_50
            << " delta=" << r.delta_vs_baseline.value_or(0.0) << "\n";
}

Phase1Outcome do_phase1(const RunContext& ctx, Ledger& ledger) {
  write_text(fs::path(ctx.config.out_dir) / "phase1_plan.jsonl",
             plan_to_jsonl(generate_ofat(ctx.axes).entries, ctx.axes));
  Phase1Outcome p1 = run_phase1(ctx, ledger);
  std::size_t failed = 0;
  const TrialRecord* best = nullptr;
  for (const auto& r : p1.records) {
    if (!r.ok) {
      ++failed;
      continue;
    }
    if (!best || ranks_above(*r.map_at_50, r.fingerprint, *best->map_at_50, best->fingerprint)) {
      best = &r;
    }
  }
  std::cout << "phase1: " << p1.records.size() << " trials, " << failed << " failed\n";
  if (best) print_best("phase1 best", *best);
  return p1;
}

void do_phase2(const RunContext& ctx, Ledger& ledger, const Phase1Outcome& p1) {
  const Phase2Plan plan = generate_phase2_base(ctx.axes, p1.scores, p1.failed);
  write_text(fs::path(ctx.config.out_dir) / "phase2_base_plan.jsonl",
             plan_to_jsonl(plan.base, ctx.axes));
  Phase2Outcome p2 = run_phase2(ctx, ledger, p1);
  std::cout << "phase2: " << p2.records.size() << " trials\n";
  if (p2.best) print_best("phase2 best", *p2.best);
}

std::string best_prompt_from_ledger(const Ledger& ledger) {
  const TrialRecord* best = nullptr;
  for (const auto& r : ledger.trials()) {
    if (!r.ok || r.phase == Phase::kPhase1) continue;
    if (!best || ranks_above(*r.map_at_50, r.fingerprint, *best->map_at_50, best->fingerprint)) {
      best = &r;
    }
  }
  if (!best) {
    for (const auto& r : ledger.trials()) {
      if (!r.ok) continue;
      if (!best || ranks_above(*r.map_at_50, r.fingerprint, *best->map_at_50, best->fingerprint)) {
        best = &r;
      }
    }
  }
  if (!best) throw Error(ErrorCode::kEmptyLedger, "no ok trials to calibrate; pass --prompt");
  return best->prompt;
}

ReportFormats parse_formats(const std::vector<std::string>& names) {
  if (names.empty()) return {};
  ReportFormats f{false, false, false};
  for (const auto& n : names) {
    if (n == "csv") f.csv = true;
    else if (n == "json") f.json = true;
    else if (n == "svg") f.svg = true;
    else throw Error(ErrorCode::kInvalidConfig, "unknown format " + n);
  }
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Axis-structured prompt search for open-vocabulary detectors"};
  app.require_subcommand(1);

  CommonFlags phase1_flags, phase2_flags, run_flags, eval_flags, calib_flags;
  auto* phase1 = app.add_subcommand("phase1", "One-factor-at-a-time axis analysis");
  phase1_flags.attach(phase1);
  auto* phase2 = app.add_subcommand("phase2", "Staged combinatorial search (needs phase1 in the ledger)");
  phase2_flags.attach(phase2);
  auto* run = app.add_subcommand("run", "phase1 followed by phase2");
  run_flags.attach(run);

  auto* eval = app.add_subcommand("eval", "Score a single prompt");
  eval_flags.attach(eval);
  std::string eval_prompt;
  std::string eval_format = "json";
  std::string record_path;
  eval->add_option("--prompt", eval_prompt, "Prompt text")->required();
  eval->add_option("--format", eval_format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));
  eval->add_option("--record", record_path,
                   "Write the backend's responses as a prediction cache");

  auto* calib = app.add_subcommand("calibrate", "F1-maximizing confidence threshold");
  calib_flags.attach(calib);
  std::string calib_prompt;
  calib->add_option("--prompt", calib_prompt,
                    "Prompt text (default: best prompt in the ledger)");

  auto* translate = app.add_subcommand("translate", "Translate an axis file to a new target");
  std::string tr_axes, tr_target, tr_stub, tr_url, tr_model, tr_key_env, tr_out;
  int tr_attempts = 3;
  translate->add_option("--axes", tr_axes, "Source axis file")->required();
  translate->add_option("--target", tr_target, "New target description")->required();
  translate->add_option("--llm-stub", tr_stub, "File-backed stub replies");
  translate->add_option("--llm-url", tr_url, "Chat-completions endpoint URL");
  translate->add_option("--llm-model", tr_model, "Model name sent to the endpoint");
  translate->add_option("--llm-key-env", tr_key_env, "Environment variable holding the API key");
  translate->add_option("--max-attempts", tr_attempts, "Validation retries")
      ->check(CLI::PositiveNumber);
  translate->add_option("--out", tr_out, "Output axis file")->required();

  auto* report = app.add_subcommand("report", "Tables and charts from one or more ledgers");
  std::vector<std::string> report_ledgers;
  std::string report_out = "report";
  std::vector<std::string> report_formats;
  report->add_option("--ledger", report_ledgers, "Ledger file(s)")->required();
  report->add_option("--out", report_out, "Report directory");
  report->add_option("--format", report_formats, "csv | json | svg (repeatable)")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phase1 || *phase2 || *run) {
      const CommonFlags& flags = *phase1 ? phase1_flags : *phase2 ? phase2_flags : run_flags;
      RunConfig config = flags.resolve();
      RunContext ctx = make_context(config);
      fs::create_directories(config.out_dir);
      Ledger ledger(ledger_path(config));
      std::cout << "backend " << ctx.backend->descriptor().name << ", dataset "
                << ctx.dataset_id << ", config " << ctx.config_hash << "\n";
      if (*phase1) {
        do_phase1(ctx, ledger);
      } else if (*phase2) {
        do_phase2(ctx, ledger, phase1_from_ledger(ctx, ledger));
      } else {
        do_phase1(ctx, ledger);
        do_phase2(ctx, ledger, phase1_from_ledger(ctx, ledger));
      }
      std::cout << "ledger: " << ledger.path().string() << "\n";
    } else if (*eval) {
      RunConfig config = eval_flags.resolve();
      std::shared_ptr<RecordingBackend> recorder;
      RunContext ctx = [&] {
        if (record_path.empty()) return make_context(config);
        config.validate();
        GroundTruthSet gt = GroundTruthSet::load(config.gt_path);
        recorder = std::make_shared<RecordingBackend>(
            make_backend(config.effective_backend(), gt, config.seed));
        return make_context(config, recorder);
      }();
      EvalResult res = evaluate_prompt(ctx, eval_prompt);
      if (eval_format == "csv") {
        std::cout << f1_curve_csv(res.f1_curve);
      } else {
        json j = res.to_json();
        j["prompt"] = eval_prompt;
        std::cout << j.dump(2) << "\n";
      }
      if (recorder) recorder->recorded().save(record_path);
    } else if (*calib) {
      RunConfig config = calib_flags.resolve();
      RunContext ctx = make_context(config);
      fs::create_directories(config.out_dir);
      Ledger ledger(ledger_path(config));
      const std::string prompt =
          calib_prompt.empty() ? best_prompt_from_ledger(ledger) : calib_prompt;
      CalibrationRecord rec = calibrate(ctx, ledger, prompt);
      json j = rec.to_json();
      j.erase("curve");
      std::cout << j.dump(2) << "\n";
      if (rec.result.no_detections) std::cerr << "warning: no detections for prompt\n";
    } else if (*translate) {
      TranslationRequest req{AxisSet::load(tr_axes), tr_target, tr_attempts};
      std::unique_ptr<LlmClient> llm;
      if (!tr_stub.empty()) {
        llm = std::make_unique<StubLlm>(StubLlm::load_replies(tr_stub));
      } else if (!tr_url.empty()) {
        llm = std::make_unique<HttpChatLlm>(LlmEndpoint{tr_url, tr_model, tr_key_env});
      } else {
        throw Error(ErrorCode::kInvalidConfig, "pass --llm-stub or --llm-url");
      }
      TranslationResult res = translate_axes(req, *llm);
      res.axes.save(tr_out);
      json meta = {{"template_version", res.template_version},
                   {"attempts", res.attempts},
                   {"source", tr_axes},
                   {"target", tr_target}};
      write_text(tr_out + ".meta.json", meta.dump(2) + "\n");
      std::cout << "wrote " << tr_out << " (" << res.template_version << ", "
                << res.attempts << " attempt(s))\n";
    } else if (*report) {
      std::vector<TrialRecord> trials;
      std::vector<CalibrationRecord> calibrations;
      for (const auto& path : report_ledgers) {
        Ledger l = Ledger::read(path);
        auto t = l.latest_trials();
        trials.insert(trials.end(), t.begin(), t.end());
        calibrations.insert(calibrations.end(), l.calibrations().begin(),
                            l.calibrations().end());
      }
      ReportBundle bundle = build_report(trials, calibrations);
      for (const auto& p : write_report(bundle, report_out, parse_formats(report_formats))) {
        std::cout << p.string() << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
