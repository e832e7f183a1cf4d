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

// Phase-1 one-factor-at-a-time plans and the staged Phase-2 combinatorial
// plan (three base sweeps, then negation on the top N, then emoji on the
// top 1).

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "promptaxis/axis.hpp"

namespace promptaxis {

inline constexpr std::string_view kBaselineLabel = "baseline";

struct PlannedSpec {
  PromptSpec spec;
  // Phase 1: perturbed axis name or "baseline". Phase 2: sweep label.
  std::string label;
};

struct Phase1Plan {
  std::vector<PlannedSpec> entries;
};

struct Phase2Config {
  int top_n_for_negation = 3;
  bool include_emoji_stage = true;

  void validate() const {
    if (top_n_for_negation < 1) {
      throw Error(ErrorCode::kInvalidConfig, "top_n must be >= 1");
    }
  }
};

enum class Sweep { kColorBySize, kGrammarByColor, kAnatomy };

inline std::string_view sweep_label(Sweep sweep) {
  switch (sweep) {
    case Sweep::kColorBySize: return "color_x_size";
    case Sweep::kGrammarByColor: return "grammar_x_color";
    case Sweep::kAnatomy: return "anatomy";
  }
  return "";
}

struct Phase2Plan {
  std::vector<PlannedSpec> base;
  Level best_grammar = Level::baseline();
  Level best_taxonomy = Level::baseline();
  Level best_color = Level::baseline();
};

// Fingerprint -> mAP@0.5 for evaluated specs.
using ScoreTable = std::map<std::string, double>;

inline Phase1Plan generate_ofat(const AxisSet& axes) {
  Phase1Plan plan;
  plan.entries.push_back({PromptSpec::baseline(), std::string(kBaselineLabel)});
  for (Axis a : kSlotOrder) {
    for (std::size_t i = 0; i < axes.axis(a).values.size(); ++i) {
      plan.entries.push_back({PromptSpec::baseline().with(a, Level::value(i)),
                              std::string(axis_name(a))});
    }
  }
  return plan;
}

// Argmax over the OFAT specs for one axis. Baseline wins ties, then the
// lowest value index. Fingerprints listed in `excluded` (failed trials) are
// skipped rather than treated as missing.
inline Level best_level(const ScoreTable& scores, const AxisSet& axes,
                        Axis axis,
                        const std::set<std::string>& excluded = {}) {
  const std::string base_fp = PromptSpec::baseline().fingerprint();
  auto base_it = scores.find(base_fp);
  if (base_it == scores.end()) {
    throw Error(ErrorCode::kMissingScore, "baseline spec " + base_fp);
  }
  Level best = Level::baseline();
  double best_score = base_it->second;
  for (std::size_t i = 0; i < axes.axis(axis).values.size(); ++i) {
    const std::string fp =
        PromptSpec::baseline().with(axis, Level::value(i)).fingerprint();
    if (excluded.count(fp)) continue;
    auto it = scores.find(fp);
    if (it == scores.end()) {
      throw Error(ErrorCode::kMissingScore,
                  std::string(axis_name(axis)) + " spec " + fp);
    }
    if (it->second > best_score) {
      best_score = it->second;
      best = Level::value(i);
    }
  }
  return best;
}

inline Phase2Plan generate_phase2_base(
    const AxisSet& axes, const ScoreTable& phase1_scores,
    const std::set<std::string>& excluded = {}) {
  Phase2Plan plan;
  plan.best_grammar = best_level(phase1_scores, axes, Axis::kGrammar, excluded);
  plan.best_taxonomy =
      best_level(phase1_scores, axes, Axis::kTaxonomy, excluded);
  plan.best_color = best_level(phase1_scores, axes, Axis::kColor, excluded);

  std::set<std::string> seen;
  auto add = [&](const PromptSpec& spec, Sweep sweep) {
    if (seen.insert(spec.fingerprint()).second) {
      plan.base.push_back({spec, std::string(sweep_label(sweep))});
    }
  };

  const auto& colors = axes.axis(Axis::kColor).values;
  const auto& sizes = axes.axis(Axis::kSize).values;
  const PromptSpec anchor = PromptSpec::baseline()
                                .with(Axis::kGrammar, plan.best_grammar)
                                .with(Axis::kTaxonomy, plan.best_taxonomy);

  for (std::size_t c = 0; c < colors.size(); ++c) {
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      add(anchor.with(Axis::kColor, Level::value(c))
              .with(Axis::kSize, Level::value(s)),
          Sweep::kColorBySize);
    }
  }

  std::vector<Level> grammars{Level::baseline()};
  for (std::size_t g = 0; g < axes.axis(Axis::kGrammar).values.size(); ++g) {
    grammars.push_back(Level::value(g));
  }
  for (Level g : grammars) {
    if (g == plan.best_grammar) continue;
    for (std::size_t c = 0; c < colors.size(); ++c) {
      add(PromptSpec::baseline()
              .with(Axis::kTaxonomy, plan.best_taxonomy)
              .with(Axis::kGrammar, g)
              .with(Axis::kColor, Level::value(c)),
          Sweep::kGrammarByColor);
    }
  }

  for (std::size_t i = 0; i < axes.axis(Axis::kAnatomy).values.size(); ++i) {
    add(anchor.with(Axis::kColor, plan.best_color)
            .with(Axis::kAnatomy, Level::value(i)),
        Sweep::kAnatomy);
  }
  return plan;
}

struct ScoredSpec {
  PromptSpec spec;
  double score = 0.0;
};

// Descending score, ties by ascending fingerprint.
inline std::vector<ScoredSpec> rank_results(std::vector<ScoredSpec> results) {
  std::sort(results.begin(), results.end(),
            [](const ScoredSpec& a, const ScoredSpec& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.spec.fingerprint() < b.spec.fingerprint();
            });
  return results;
}

inline std::vector<PromptSpec> expand_negation(
    const std::vector<ScoredSpec>& ranked, const AxisSet& axes, int top_n) {
  if (top_n < 1) throw Error(ErrorCode::kInvalidConfig, "top_n must be >= 1");
  const std::size_t take =
      std::min(static_cast<std::size_t>(top_n), ranked.size());
  std::vector<PromptSpec> out;
  for (std::size_t r = 0; r < take; ++r) {
    const PromptSpec& base = ranked[r].spec;
    if (!base.level(Axis::kNegation).is_baseline()) {
      throw Error(ErrorCode::kPrecondition,
                  "base spec already carries a negation: " + base.fingerprint());
    }
    for (std::size_t n = 0; n < axes.axis(Axis::kNegation).values.size(); ++n) {
      out.push_back(base.with(Axis::kNegation, Level::value(n)));
    }
  }
  return out;
}

inline std::vector<PromptSpec> expand_emoji(const PromptSpec& best,
                                            const AxisSet& axes) {
  if (!best.level(Axis::kEmoji).is_baseline()) {
    throw Error(ErrorCode::kPrecondition,
                "best spec already carries an emoji: " + best.fingerprint());
  }
  std::vector<PromptSpec> out;
  for (std::size_t e = 0; e < axes.axis(Axis::kEmoji).values.size(); ++e) {
    out.push_back(best.with(Axis::kEmoji, Level::value(e)));
  }
  return out;
}

// One JSON object per line: fingerprint, label, rendered text.
inline std::string plan_to_jsonl(const std::vector<PlannedSpec>& entries,
                                 const AxisSet& axes) {
  std::string out;
  for (const auto& e : entries) {
    json line = {{"fingerprint", e.spec.fingerprint()},
                 {"label", e.label},
                 {"prompt", render_prompt(e.spec, axes).text}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace promptaxis
