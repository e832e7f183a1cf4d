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

// Append-only JSON Lines run ledger. Each line is either a trial record or a
// calibration record; both carry "schema" and "kind".

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "promptaxis/error.hpp"
#include "promptaxis/eval.hpp"

namespace promptaxis {

inline constexpr int kLedgerSchemaVersion = 1;

enum class Phase { kPhase1, kPhase2Base, kPhase2Negation, kPhase2Emoji };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kPhase1: return "phase1";
    case Phase::kPhase2Base: return "phase2_base";
    case Phase::kPhase2Negation: return "phase2_negation";
    case Phase::kPhase2Emoji: return "phase2_emoji";
  }
  return "";
}

inline Phase parse_phase(std::string_view name) {
  for (Phase p : {Phase::kPhase1, Phase::kPhase2Base, Phase::kPhase2Negation,
                  Phase::kPhase2Emoji}) {
    if (phase_name(p) == name) return p;
  }
  throw Error(ErrorCode::kParseError, "unknown phase " + std::string(name));
}

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct TrialRecord {
  std::string trial_id;
  Phase phase = Phase::kPhase1;
  std::string sweep_label;
  // Phase 1: the perturbed axis or "baseline".
  std::string axis_label;
  // Phase 1: display label of the perturbed level.
  std::string level_label;
  std::string fingerprint;
  std::string prompt;
  std::string backend;
  std::string dataset;
  std::optional<double> map_at_50;
  std::optional<double> delta_vs_baseline;
  std::optional<double> f1_threshold;
  bool ok = true;
  std::string error;
  std::string config_hash;
  std::string timestamp;

  json to_json() const {
    auto opt = [](const std::optional<double>& v) -> json {
      return v ? json(*v) : json(nullptr);
    };
    return {{"schema", kLedgerSchemaVersion},
            {"kind", "trial"},
            {"trial_id", trial_id},
            {"phase", phase_name(phase)},
            {"sweep_label", sweep_label},
            {"axis_label", axis_label},
            {"level_label", level_label},
            {"fingerprint", fingerprint},
            {"prompt", prompt},
            {"backend", backend},
            {"dataset", dataset},
            {"map_at_50", opt(map_at_50)},
            {"delta_vs_baseline", opt(delta_vs_baseline)},
            {"f1_threshold", opt(f1_threshold)},
            {"status", ok ? "ok" : "failed"},
            {"error", error},
            {"config_hash", config_hash},
            {"timestamp", timestamp}};
  }

  static TrialRecord from_json(const json& j) {
    auto opt = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<double>();
    };
    TrialRecord r;
    r.trial_id = j.at("trial_id").get<std::string>();
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.sweep_label = j.value("sweep_label", "");
    r.axis_label = j.value("axis_label", "");
    r.level_label = j.value("level_label", "");
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.map_at_50 = opt("map_at_50");
    r.delta_vs_baseline = opt("delta_vs_baseline");
    r.f1_threshold = opt("f1_threshold");
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.value("error", "");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.timestamp = j.value("timestamp", "");
    return r;
  }
};

struct CalibrationRecord {
  std::string prompt;
  std::string backend;
  std::string dataset;
  std::string config_hash;
  Calibration result;
  std::vector<F1Point> curve;
  std::string timestamp;

  json to_json() const {
    json pts = json::array();
    for (const auto& p : curve) pts.push_back({p.threshold, p.precision, p.recall, p.f1});
    return {{"schema", kLedgerSchemaVersion},
            {"kind", "calibration"},
            {"prompt", prompt},
            {"backend", backend},
            {"dataset", dataset},
            {"config_hash", config_hash},
            {"threshold", result.threshold},
            {"precision", result.precision},
            {"recall", result.recall},
            {"f1", result.f1},
            {"no_detections", result.no_detections},
            {"curve", std::move(pts)},
            {"timestamp", timestamp}};
  }

  static CalibrationRecord from_json(const json& j) {
    CalibrationRecord r;
    r.prompt = j.at("prompt").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.config_hash = j.value("config_hash", "");
    r.result.threshold = j.at("threshold").get<double>();
    r.result.precision = j.at("precision").get<double>();
    r.result.recall = j.at("recall").get<double>();
    r.result.f1 = j.at("f1").get<double>();
    r.result.no_detections = j.at("no_detections").get<bool>();
    for (const json& p : j.value("curve", json::array())) {
      r.curve.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                         p.at(2).get<double>(), p.at(3).get<double>()});
    }
    r.timestamp = j.value("timestamp", "");
    return r;
  }
};

// Lines are only ever appended. An empty path keeps the ledger in memory.
class Ledger {
 public:
  Ledger() = default;

  explicit Ledger(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) load_existing();
  }

  static Ledger read(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kIo, "ledger not found: " + path.string());
    }
    return Ledger(path);
  }

  void append(TrialRecord record) {
    std::lock_guard lock(mu_);
    write_line(record.to_json());
    trials_.push_back(std::move(record));
  }

  void append(CalibrationRecord record) {
    std::lock_guard lock(mu_);
    write_line(record.to_json());
    calibrations_.push_back(std::move(record));
  }

  const std::vector<TrialRecord>& trials() const { return trials_; }
  const std::vector<CalibrationRecord>& calibrations() const { return calibrations_; }
  bool empty() const { return trials_.empty() && calibrations_.empty(); }
  const std::filesystem::path& path() const { return path_; }

  // Latest ok record for (config hash, phase, fingerprint), if any.
  const TrialRecord* find_ok(const std::string& config_hash, Phase phase,
                             const std::string& fingerprint) const {
    const TrialRecord* hit = nullptr;
    for (const auto& r : trials_) {
      if (r.ok && r.phase == phase && r.fingerprint == fingerprint &&
          r.config_hash == config_hash) {
        hit = &r;
      }
    }
    return hit;
  }

  // Effective view: the last record per (config hash, phase, fingerprint),
  // in first-appearance order.
  std::vector<TrialRecord> latest_trials() const {
    std::map<std::tuple<std::string, Phase, std::string>, std::size_t> slot;
    std::vector<TrialRecord> out;
    for (const auto& r : trials_) {
      auto key = std::make_tuple(r.config_hash, r.phase, r.fingerprint);
      auto it = slot.find(key);
      if (it == slot.end()) {
        slot.emplace(key, out.size());
        out.push_back(r);
      } else {
        out[it->second] = r;
      }
    }
    return out;
  }

  // Every line with its timestamp removed; equal projections mean equal
  // runs.
  std::string canonical_projection() const {
    std::string out;
    for (const auto& line : lines_) {
      json j = line;
      j.erase("timestamp");
      out += j.dump();
      out += '\n';
    }
    return out;
  }

 private:
  void load_existing() {
    std::ifstream in(path_);
    if (!in) throw Error(ErrorCode::kIo, "cannot read ledger " + path_.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        json j = json::parse(line);
        const std::string kind = j.value("kind", "trial");
        if (kind == "trial") {
          trials_.push_back(TrialRecord::from_json(j));
        } else if (kind == "calibration") {
          calibrations_.push_back(CalibrationRecord::from_json(j));
        } else {
          throw Error(ErrorCode::kParseError, "unknown record kind " + kind);
        }
        lines_.push_back(std::move(j));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError, path_.string() + " line " +
                                                std::to_string(line_no) + ": " +
                                                e.what());
      }
    }
  }

  void write_line(json j) {
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path_.string());
      out << j.dump() << '\n';
      out.flush();
    }
    lines_.push_back(std::move(j));
  }

  std::filesystem::path path_;
  std::vector<TrialRecord> trials_;
  std::vector<CalibrationRecord> calibrations_;
  std::vector<json> lines_;
  mutable std::mutex mu_;
};

}  // namespace promptaxis
