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

// Ledger projections: per-axis delta tables, best prompt per phase,
// cross-backend comparison, failures, calibration curves, and SVG charts.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptaxis/ledger.hpp"

namespace promptaxis {

struct AxisDeltaRow {
  std::string backend, dataset, axis, level, prompt;
  double map_at_50 = 0;
  double delta = 0;
};

struct BestPromptRow {
  std::string backend, dataset, phase, prompt;
  double map_at_50 = 0;
  double delta = 0;
};

struct FailureRow {
  std::string backend, dataset, phase, trial_id, prompt, error;
};

struct CurveExport {
  std::string name;
  std::string csv;
};

struct ReportBundle {
  std::vector<AxisDeltaRow> axis_deltas;
  std::vector<BestPromptRow> best_prompts;
  std::vector<FailureRow> failures;
  std::vector<CurveExport> curves;
  std::vector<std::string> backends;
  std::vector<std::string> datasets;
};

inline bool ranks_above(double score, const std::string& fp, double best_score,
                        const std::string& best_fp) {
  return score > best_score || (score == best_score && fp < best_fp);
}

inline std::string sanitize_name(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    out += std::isalnum(c) || c == '-' || c == '_' || c == '.' ? static_cast<char>(c) : '_';
  }
  return out.empty() ? "_" : out;
}

// Failed trials are listed separately and never take part in an argmax.
inline ReportBundle build_report(const std::vector<TrialRecord>& trials,
                                 const std::vector<CalibrationRecord>& calibrations = {}) {
  if (trials.empty() && calibrations.empty()) {
    throw Error(ErrorCode::kEmptyLedger, "nothing to report");
  }
  ReportBundle bundle;
  std::set<std::string> backends, datasets;
  // (backend, dataset, phase) -> index into best_prompts plus fingerprint.
  std::map<std::tuple<std::string, std::string, std::string>,
           std::pair<std::size_t, std::string>> best;
  auto consider = [&](const TrialRecord& r, const std::string& phase) {
    auto key = std::make_tuple(r.backend, r.dataset, phase);
    auto it = best.find(key);
    BestPromptRow row{r.backend, r.dataset, phase, r.prompt, *r.map_at_50,
                      r.delta_vs_baseline.value_or(0.0)};
    if (it == best.end()) {
      best.emplace(key, std::pair{bundle.best_prompts.size(), r.fingerprint});
      bundle.best_prompts.push_back(row);
    } else {
      auto& cur = bundle.best_prompts[it->second.first];
      if (ranks_above(row.map_at_50, r.fingerprint, cur.map_at_50, it->second.second)) {
        cur = row;
        it->second.second = r.fingerprint;
      }
    }
  };

  for (const auto& r : trials) {
    backends.insert(r.backend);
    datasets.insert(r.dataset);
    if (!r.ok) {
      bundle.failures.push_back({r.backend, r.dataset, std::string(phase_name(r.phase)),
                                 r.trial_id, r.prompt, r.error});
      continue;
    }
    if (r.phase == Phase::kPhase1 && r.axis_label != kBaselineLabel) {
      bundle.axis_deltas.push_back({r.backend, r.dataset, r.axis_label, r.level_label,
                                    r.prompt, *r.map_at_50,
                                    r.delta_vs_baseline.value_or(0.0)});
    }
    consider(r, std::string(phase_name(r.phase)));
    if (r.phase != Phase::kPhase1) consider(r, "phase2");
  }
  std::stable_sort(bundle.best_prompts.begin(), bundle.best_prompts.end(),
                   [](const BestPromptRow& a, const BestPromptRow& b) {
                     return std::tie(a.backend, a.dataset, a.phase) <
                            std::tie(b.backend, b.dataset, b.phase);
                   });
  for (std::size_t i = 0; i < calibrations.size(); ++i) {
    const auto& c = calibrations[i];
    backends.insert(c.backend);
    datasets.insert(c.dataset);
    bundle.curves.push_back({"curve_" + std::to_string(i) + "_" +
                                 sanitize_name(c.backend) + "_" + sanitize_name(c.dataset),
                             f1_curve_csv(c.curve)});
  }
  bundle.backends.assign(backends.begin(), backends.end());
  bundle.datasets.assign(datasets.begin(), datasets.end());
  return bundle;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_number(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

inline std::string axis_deltas_csv(const ReportBundle& b) {
  std::string out = "backend,dataset,axis,level,prompt,map_at_50,delta\n";
  for (const auto& r : b.axis_deltas) {
    out += csv_field(r.backend) + ',' + csv_field(r.dataset) + ',' + csv_field(r.axis) +
           ',' + csv_field(r.level) + ',' + csv_field(r.prompt) + ',' +
           csv_number(r.map_at_50) + ',' + csv_number(r.delta) + '\n';
  }
  return out;
}

inline std::string best_prompts_csv(const ReportBundle& b) {
  std::string out = "backend,dataset,phase,prompt,map_at_50,delta\n";
  for (const auto& r : b.best_prompts) {
    out += csv_field(r.backend) + ',' + csv_field(r.dataset) + ',' + csv_field(r.phase) +
           ',' + csv_field(r.prompt) + ',' + csv_number(r.map_at_50) + ',' +
           csv_number(r.delta) + '\n';
  }
  return out;
}

// One row per (dataset, phase); one prompt/mAP column pair per backend.
inline std::string comparison_csv(const ReportBundle& b) {
  std::string out = "dataset,phase";
  for (const auto& be : b.backends) {
    out += ',' + csv_field(be + " prompt") + ',' + csv_field(be + " map_at_50");
  }
  out += '\n';
  std::set<std::pair<std::string, std::string>> rows;
  for (const auto& r : b.best_prompts) rows.insert({r.dataset, r.phase});
  for (const auto& [dataset, phase] : rows) {
    out += csv_field(dataset) + ',' + csv_field(phase);
    for (const auto& be : b.backends) {
      auto it = std::find_if(b.best_prompts.begin(), b.best_prompts.end(),
                             [&](const BestPromptRow& r) {
                               return r.backend == be && r.dataset == dataset &&
                                      r.phase == phase;
                             });
      if (it == b.best_prompts.end()) {
        out += ",,";
      } else {
        out += ',' + csv_field(it->prompt) + ',' + csv_number(it->map_at_50);
      }
    }
    out += '\n';
  }
  return out;
}

inline std::string failures_csv(const ReportBundle& b) {
  std::string out = "backend,dataset,phase,trial_id,prompt,error\n";
  for (const auto& r : b.failures) {
    out += csv_field(r.backend) + ',' + csv_field(r.dataset) + ',' + csv_field(r.phase) +
           ',' + csv_field(r.trial_id) + ',' + csv_field(r.prompt) + ',' +
           csv_field(r.error) + '\n';
  }
  return out;
}

inline json report_json(const ReportBundle& b) {
  json axis = json::array();
  for (const auto& r : b.axis_deltas) {
    axis.push_back({{"backend", r.backend}, {"dataset", r.dataset}, {"axis", r.axis},
                    {"level", r.level}, {"prompt", r.prompt},
                    {"map_at_50", r.map_at_50}, {"delta", r.delta}});
  }
  json best = json::array();
  for (const auto& r : b.best_prompts) {
    best.push_back({{"backend", r.backend}, {"dataset", r.dataset}, {"phase", r.phase},
                    {"prompt", r.prompt}, {"map_at_50", r.map_at_50},
                    {"delta", r.delta}});
  }
  json failures = json::array();
  for (const auto& r : b.failures) {
    failures.push_back({{"backend", r.backend}, {"dataset", r.dataset},
                        {"phase", r.phase}, {"trial_id", r.trial_id},
                        {"prompt", r.prompt}, {"error", r.error}});
  }
  return {{"axis_deltas", std::move(axis)},
          {"best_prompts", std::move(best)},
          {"failures", std::move(failures)},
          {"backends", b.backends},
          {"datasets", b.datasets}};
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Horizontal bar chart of phase-1 deltas for one (backend, dataset),
// grouped by axis.
inline std::string axis_delta_svg(const ReportBundle& b, const std::string& backend,
                                  const std::string& dataset) {
  std::vector<const AxisDeltaRow*> rows;
  double extent = 1e-9;
  for (const auto& r : b.axis_deltas) {
    if (r.backend == backend && r.dataset == dataset) {
      rows.push_back(&r);
      extent = std::max(extent, std::abs(r.delta));
    }
  }
  const int row_h = 16, label_w = 320, chart_w = 360, top = 40;
  const int height = top + row_h * static_cast<int>(rows.size()) + 20;
  const double mid = label_w + chart_w / 2.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label_w + chart_w + 80
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<text x=\"10\" y=\"20\" font-size=\"14\">Change in mAP@0.5 vs baseline: "
      << xml_escape(backend) << " / " << xml_escape(dataset) << "</text>\n"
      << "<line x1=\"" << mid << "\" y1=\"" << top - 6 << "\" x2=\"" << mid << "\" y2=\""
      << height - 14 << "\" stroke=\"#444\" stroke-dasharray=\"3,3\"/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = *rows[i];
    const double y = top + row_h * static_cast<double>(i);
    const double len = r.delta / extent * (chart_w / 2.0 - 4);
    const double x = len >= 0 ? mid : mid + len;
    svg << "<text x=\"10\" y=\"" << y + 11 << "\">" << xml_escape(r.axis + ": " + r.level)
        << "</text>\n"
        << "<rect x=\"" << x << "\" y=\"" << y + 2 << "\" width=\"" << std::abs(len)
        << "\" height=\"" << row_h - 4 << "\" fill=\""
        << (r.delta >= 0 ? "#4472C4" : "#ED7D31") << "\"/>\n"
        << "<text x=\"" << label_w + chart_w + 4 << "\" y=\"" << y + 11 << "\">"
        << csv_number(r.delta) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool svg = false;
};

// Writes the bundle under `dir`; returns the files written.
inline std::vector<std::filesystem::path> write_report(const ReportBundle& b,
                                                       const std::filesystem::path& dir,
                                                       ReportFormats formats) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& content) {
    auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out << content;
    written.push_back(path);
  };
  if (formats.csv) {
    put("axis_deltas.csv", axis_deltas_csv(b));
    put("best_prompts.csv", best_prompts_csv(b));
    put("comparison.csv", comparison_csv(b));
    put("failures.csv", failures_csv(b));
    for (const auto& c : b.curves) put(c.name + ".csv", c.csv);
  }
  if (formats.json) put("report.json", report_json(b).dump(2) + "\n");
  if (formats.svg) {
    std::set<std::pair<std::string, std::string>> groups;
    for (const auto& r : b.axis_deltas) groups.insert({r.backend, r.dataset});
    for (const auto& [be, ds] : groups) {
      put("axis_deltas_" + sanitize_name(be) + "_" + sanitize_name(ds) + ".svg",
          axis_delta_svg(b, be, ds));
    }
  }
  return written;
}

}  // namespace promptaxis
