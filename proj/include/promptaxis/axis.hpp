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

// Prompt axes, level assignments, and the slot-ordered prompt renderer.

#pragma once

#include <array>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "promptaxis/error.hpp"

namespace promptaxis {

using json = nlohmann::json;

// Enumerators are declared in rendering slot order.
enum class Axis : std::size_t {
  kGrammar = 0,
  kSize,
  kColor,
  kTaxonomy,
  kAnatomy,
  kPhenology,
  kNegation,
  kEmoji,
};

inline constexpr std::size_t kAxisCount = 8;

inline constexpr std::array<Axis, kAxisCount> kSlotOrder = {
    Axis::kGrammar,  Axis::kSize,      Axis::kColor,    Axis::kTaxonomy,
    Axis::kAnatomy,  Axis::kPhenology, Axis::kNegation, Axis::kEmoji};

inline constexpr std::string_view axis_name(Axis axis) {
  constexpr std::array<std::string_view, kAxisCount> kNames = {
      "grammar", "size",      "color",    "taxonomy",
      "anatomy", "phenology", "negation", "emoji"};
  return kNames[static_cast<std::size_t>(axis)];
}

inline std::optional<Axis> parse_axis(std::string_view name) {
  for (Axis axis : kSlotOrder) {
    if (axis_name(axis) == name) return axis;
  }
  return std::nullopt;
}

// One level of an axis: the baseline or an index into the axis value list.
class Level {
 public:
  // Default-constructed levels are the baseline.
  constexpr Level() = default;
  static constexpr Level baseline() { return Level(); }
  static constexpr Level value(std::size_t index) { return Level(index); }

  constexpr bool is_baseline() const { return !index_.has_value(); }
  // Only meaningful when !is_baseline().
  constexpr std::size_t index() const { return index_.value_or(0); }

  friend constexpr bool operator==(const Level&, const Level&) = default;

 private:
  constexpr explicit Level(std::size_t index) : index_(index) {}
  std::optional<std::size_t> index_;
};

struct AxisDefinition {
  std::string baseline;
  std::vector<std::string> values;

  std::size_t level_count() const { return values.size() + 1; }

  const std::string& text(Level level) const {
    return level.is_baseline() ? baseline : values.at(level.index());
  }

  friend bool operator==(const AxisDefinition&,
                         const AxisDefinition&) = default;
};

class AxisSet {
 public:
  // Throws Error(kInvalidAxisSet) listing every violated invariant.
  AxisSet(std::string target_name,
          std::array<AxisDefinition, kAxisCount> axes)
      : target_name_(std::move(target_name)), axes_(std::move(axes)) {
    auto issues = check_invariants(axes_);
    if (!issues.empty()) throw Error(ErrorCode::kInvalidAxisSet, join(issues));
  }

  const std::string& target_name() const { return target_name_; }
  const AxisDefinition& axis(Axis a) const {
    return axes_[static_cast<std::size_t>(a)];
  }
  const std::array<AxisDefinition, kAxisCount>& axes() const { return axes_; }

  // Every schema and invariant problem in `doc`; empty means from_json
  // will succeed.
  static std::vector<std::string> validate(const json& doc) {
    std::vector<std::string> issues;
    if (!doc.is_object()) {
      issues.emplace_back("document must be a JSON object");
      return issues;
    }
    if (!doc.contains("target") || !doc["target"].is_string()) {
      issues.emplace_back("\"target\" must be a string");
    }
    if (!doc.contains("axes") || !doc["axes"].is_object()) {
      issues.emplace_back("\"axes\" must be an object");
      return issues;
    }
    const json& axes = doc["axes"];
    for (auto it = axes.begin(); it != axes.end(); ++it) {
      if (!parse_axis(it.key())) {
        issues.push_back("unknown axis: " + it.key());
      }
    }
    std::array<AxisDefinition, kAxisCount> parsed;
    bool shape_ok = true;
    for (Axis a : kSlotOrder) {
      const std::string name(axis_name(a));
      if (!axes.contains(name)) {
        issues.push_back("missing axis: " + name);
        shape_ok = false;
        continue;
      }
      const json& entry = axes[name];
      if (!entry.is_object() || !entry.contains("baseline") ||
          !entry["baseline"].is_string() || !entry.contains("values") ||
          !entry["values"].is_array()) {
        issues.push_back("axis " + name +
                         " must be {\"baseline\": string, \"values\": [string]}");
        shape_ok = false;
        continue;
      }
      AxisDefinition def;
      def.baseline = entry["baseline"].get<std::string>();
      for (const json& v : entry["values"]) {
        if (!v.is_string()) {
          issues.push_back("axis " + name + " has a non-string value");
          shape_ok = false;
          break;
        }
        def.values.push_back(v.get<std::string>());
      }
      parsed[static_cast<std::size_t>(a)] = std::move(def);
    }
    if (shape_ok) {
      auto more = check_invariants(parsed);
      issues.insert(issues.end(), more.begin(), more.end());
    }
    return issues;
  }

  static AxisSet from_json(const json& doc) {
    auto issues = validate(doc);
    if (!issues.empty()) throw Error(ErrorCode::kInvalidAxisSet, join(issues));
    std::array<AxisDefinition, kAxisCount> axes;
    for (Axis a : kSlotOrder) {
      const json& entry = doc["axes"][std::string(axis_name(a))];
      auto& def = axes[static_cast<std::size_t>(a)];
      def.baseline = entry["baseline"].get<std::string>();
      def.values = entry["values"].get<std::vector<std::string>>();
    }
    return AxisSet(doc["target"].get<std::string>(), std::move(axes));
  }

  json to_json() const {
    json axes = json::object();
    for (Axis a : kSlotOrder) {
      const auto& def = axis(a);
      axes[std::string(axis_name(a))] = {{"baseline", def.baseline},
                                         {"values", def.values}};
    }
    return {{"target", target_name_}, {"axes", std::move(axes)}};
  }

  static AxisSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open axis file " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
    return from_json(doc);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write axis file " + path);
    out << to_json().dump(2) << '\n';
  }

  friend bool operator==(const AxisSet&, const AxisSet&) = default;

 private:
  static std::vector<std::string> check_invariants(
      const std::array<AxisDefinition, kAxisCount>& axes) {
    std::vector<std::string> issues;
    for (Axis a : kSlotOrder) {
      const auto& def = axes[static_cast<std::size_t>(a)];
      std::vector<std::string> seen{def.baseline};
      for (const auto& v : def.values) {
        for (const auto& s : seen) {
          if (s == v) {
            issues.push_back("axis " + std::string(axis_name(a)) +
                             " repeats level \"" + v + "\"");
            break;
          }
        }
        seen.push_back(v);
      }
    }
    if (axes[static_cast<std::size_t>(Axis::kTaxonomy)].baseline.empty()) {
      issues.emplace_back("taxonomy baseline must be non-empty");
    }
    return issues;
  }

  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& s : issues) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::string target_name_;
  std::array<AxisDefinition, kAxisCount> axes_;
};

// One level assignment per axis.
class PromptSpec {
 public:
  PromptSpec() { levels_.fill(Level::baseline()); }

  static PromptSpec baseline() { return PromptSpec(); }

  Level level(Axis a) const { return levels_[static_cast<std::size_t>(a)]; }

  PromptSpec with(Axis a, Level level) const {
    PromptSpec copy = *this;
    copy.levels_[static_cast<std::size_t>(a)] = level;
    return copy;
  }

  std::vector<Axis> differing_axes(const PromptSpec& other) const {
    std::vector<Axis> out;
    for (Axis a : kSlotOrder) {
      if (level(a) != other.level(a)) out.push_back(a);
    }
    return out;
  }

  // Canonical dedup key, e.g. "grammar=000;size=-;...". Baseline sorts
  // before any value index.
  std::string fingerprint() const {
    std::string out;
    for (Axis a : kSlotOrder) {
      if (!out.empty()) out += ';';
      out += axis_name(a);
      out += '=';
      Level l = level(a);
      if (l.is_baseline()) {
        out += '-';
      } else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%03zu", l.index());
        out += buf;
      }
    }
    return out;
  }

  static PromptSpec from_fingerprint(std::string_view fp) {
    PromptSpec spec;
    std::size_t seen = 0;
    while (!fp.empty()) {
      auto semi = fp.find(';');
      std::string_view part = fp.substr(0, semi);
      fp = semi == std::string_view::npos ? std::string_view{}
                                          : fp.substr(semi + 1);
      auto eq = part.find('=');
      if (eq == std::string_view::npos) break;
      auto axis = parse_axis(part.substr(0, eq));
      if (!axis) break;
      std::string_view value = part.substr(eq + 1);
      if (value != "-") {
        std::size_t index = 0;
        for (char c : value) {
          if (c < '0' || c > '9') {
            throw Error(ErrorCode::kInvalidSpec,
                        "bad fingerprint level: " + std::string(part));
          }
          index = index * 10 + static_cast<std::size_t>(c - '0');
        }
        spec = spec.with(*axis, Level::value(index));
      }
      ++seen;
    }
    if (seen != kAxisCount) {
      throw Error(ErrorCode::kInvalidSpec, "malformed fingerprint");
    }
    return spec;
  }

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;

 private:
  std::array<Level, kAxisCount> levels_;
};

inline void validate_spec(const PromptSpec& spec, const AxisSet& axes) {
  for (Axis a : kSlotOrder) {
    Level l = spec.level(a);
    if (!l.is_baseline() && l.index() >= axes.axis(a).values.size()) {
      throw Error(ErrorCode::kInvalidSpec,
                  std::string(axis_name(a)) + " index " +
                      std::to_string(l.index()) + " out of range");
    }
  }
}

struct RenderedPrompt {
  std::string text;
  PromptSpec spec;
  std::string fingerprint;
};

// Collapses ASCII whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

// Slots: [grammar] [size] [color] [taxonomy] [anatomy] [phenology],
// [negation] [emoji]. Empty levels contribute nothing.
inline RenderedPrompt render_prompt(const PromptSpec& spec,
                                    const AxisSet& axes) {
  validate_spec(spec, axes);
  std::string text;
  for (Axis a : kSlotOrder) {
    std::string part = normalize_whitespace(axes.axis(a).text(spec.level(a)));
    if (part.empty()) continue;
    if (!text.empty()) text += (a == Axis::kNegation) ? ", " : " ";
    text += part;
  }
  if (text.empty()) {
    throw Error(ErrorCode::kEmptyRender,
                "every slot is empty for " + spec.fingerprint());
  }
  return {std::move(text), spec, spec.fingerprint()};
}

// Human-readable label for a level in tables and plots.
inline std::string level_label(const AxisSet& axes, Axis a, Level level) {
  const std::string& text = axes.axis(a).text(level);
  if (!text.empty()) return text;
  return level.is_baseline() ? "(none)" : "(empty)";
}

// The cowpea flower axes: 1 baseline + 39 single-axis perturbations.
inline AxisSet flower_axes() {
  std::array<AxisDefinition, kAxisCount> axes;
  auto set = [&](Axis a, std::string baseline,
                 std::vector<std::string> values) {
    axes[static_cast<std::size_t>(a)] = {std::move(baseline),
                                         std::move(values)};
  };
  set(Axis::kGrammar, "a",
      {"a single", "", "a photo of a", "one", "close-up of a"});
  set(Axis::kSize, "", {"large", "small", "tiny"});
  set(Axis::kColor, "", {"yellow", "white", "cream", "purple"});
  set(Axis::kTaxonomy, "flower",
      {"cowpea flower", "bean flower", "pea flower", "legume flower",
       "black-eyed pea flower", "vigna unguiculata flower", "crop flower"});
  set(Axis::kAnatomy, "",
      {"with open petals", "with visible petals", "with petals and stamens",
       "corolla"});
  set(Axis::kPhenology, "", {"bud", "open", "closed bud", "blooming",
                             "in bloom"});
  set(Axis::kNegation, "",
      {"not a bud, not the green calyx, not a leaf, not a stem", "not a bud",
       "not a leaf", "not a leaf, not a stem",
       "not a bud, not the green calyx, not a leaf"});
  set(Axis::kEmoji, "",
      {"\U0001F338", "\U0001F33A", "\U0001F33B", "\U0001F33C", "\U0001F490",
       "\U0001F337"});
  return AxisSet("cowpea flower", std::move(axes));
}

}  // namespace promptaxis
