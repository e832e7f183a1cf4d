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

// Deterministic mock detector driven by ground truth and a token-bonus
// scoring rule. Every value it emits is a pure function of (config, seed,
// request).

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "promptaxis/backend.hpp"

namespace promptaxis {

struct TokenBonus {
  // Substring matched against the prompt text.
  std::string token;
  double tp_bonus = 0;
  // Added to the per-candidate false-positive emission probability.
  double fp_rate_delta = 0;
};

struct MockConfig {
  std::string name = "mock";
  std::uint64_t seed = 0;
  double tp_base = 0.5;
  double tp_jitter = 0.1;
  // Fraction of box width/height used for TP position noise.
  double box_noise = 0.05;
  double miss_rate = 0.0;
  int fp_per_image = 4;
  double fp_rate = 0.5;
  double fp_score_min = 0.2;
  double fp_score_max = 0.6;
  std::vector<TokenBonus> bonuses;
  bool supports_background_class = false;
  // With a background slot present, FPs scoring below this bind to it.
  double background_absorb_below = 0.0;
  std::size_t max_concurrency = 4;

  static MockConfig from_json(const json& j) {
    MockConfig c;
    try {
      c.name = j.value("name", c.name);
      c.seed = j.value("seed", c.seed);
      c.tp_base = j.value("tp_base", c.tp_base);
      c.tp_jitter = j.value("tp_jitter", c.tp_jitter);
      c.box_noise = j.value("box_noise", c.box_noise);
      c.miss_rate = j.value("miss_rate", c.miss_rate);
      c.fp_per_image = j.value("fp_per_image", c.fp_per_image);
      c.fp_rate = j.value("fp_rate", c.fp_rate);
      c.fp_score_min = j.value("fp_score_min", c.fp_score_min);
      c.fp_score_max = j.value("fp_score_max", c.fp_score_max);
      c.supports_background_class =
          j.value("supports_background_class", c.supports_background_class);
      c.background_absorb_below =
          j.value("background_absorb_below", c.background_absorb_below);
      c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
      if (j.contains("bonuses")) {
        for (const json& b : j.at("bonuses")) {
          c.bonuses.push_back({b.at("token").get<std::string>(),
                               b.value("tp_bonus", 0.0),
                               b.value("fp_rate_delta", 0.0)});
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, std::string("mock config: ") + e.what());
    }
    if (c.fp_per_image < 0 || c.max_concurrency == 0 ||
        c.fp_score_min > c.fp_score_max) {
      throw Error(ErrorCode::kInvalidConfig, "mock config out of range");
    }
    return c;
  }

  static MockConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open mock fixture " + path);
    try {
      return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class MockBackend final : public Backend {
 public:
  MockBackend(MockConfig config, GroundTruthSet gt)
      : config_(std::move(config)), gt_(std::move(gt)) {
    descriptor_.name = config_.name;
    descriptor_.kind = BackendKind::kMock;
    descriptor_.supports_background_class = config_.supports_background_class;
    descriptor_.max_concurrency = config_.max_concurrency;
  }

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  const MockConfig& config() const { return config_; }

  DetectResponse detect(const ImageRef& image,
                        std::span<const std::string> prompts) const override {
    const ImageInfo& info = gt_.image(image.id);
    std::optional<std::size_t> background;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (prompts[i].empty()) background = i;
    }
    if (!config_.supports_background_class) background.reset();

    DetectResponse response;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (prompts[i].empty()) continue;
      emit_for_prompt(info, prompts[i], i, background, response);
    }
    return response;
  }

 private:
  enum Stream : std::uint64_t { kMiss = 1, kJitter, kBoxX, kBoxY, kFpEmit,
                                kFpScore, kFpX, kFpY, kFpW, kFpH };

  // Uniform in [0, 1) keyed by (seed, image, prompt hash, index, stream).
  double uniform(ImageId image, std::uint64_t prompt_hash, std::uint64_t index,
                 Stream stream) const {
    std::uint64_t h = detail::mix(0xcbf29ce484222325ULL, config_.seed);
    h = detail::mix(h, static_cast<std::uint64_t>(image));
    h = detail::mix(h, prompt_hash);
    h = detail::mix(h, index);
    h = detail::mix(h, stream);
    std::mt19937_64 engine(h);
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  }

  void emit_for_prompt(const ImageInfo& info, const std::string& prompt,
                       std::size_t prompt_index,
                       std::optional<std::size_t> background,
                       DetectResponse& out) const {
    double tp_bonus = 0, fp_delta = 0;
    for (const auto& b : config_.bonuses) {
      if (prompt.find(b.token) != std::string::npos) {
        tp_bonus += b.tp_bonus;
        fp_delta += b.fp_rate_delta;
      }
    }
    const std::uint64_t prompt_hash = detail::fnv1a(prompt);
    const auto gts = gt_.annotations_for(info.id);
    for (std::size_t k = 0; k < gts.size(); ++k) {
      // Miss and box noise ignore the prompt: the same physical object.
      if (uniform(info.id, 0, k, kMiss) < config_.miss_rate) continue;
      const BBox& g = gts[k].box;
      const double dx = config_.box_noise * g.w * (2 * uniform(info.id, 0, k, kBoxX) - 1);
      const double dy = config_.box_noise * g.h * (2 * uniform(info.id, 0, k, kBoxY) - 1);
      const double score = std::clamp(
          config_.tp_base + tp_bonus -
              config_.tp_jitter * uniform(info.id, prompt_hash, k, kJitter),
          0.0, 1.0);
      out.detections.push_back({{g.x + dx, g.y + dy, g.w, g.h}, score, prompt_index});
    }
    const double rate = std::clamp(config_.fp_rate + fp_delta, 0.0, 1.0);
    const double span_w = info.width > 0 ? info.width : 100.0;
    const double span_h = info.height > 0 ? info.height : 100.0;
    for (int k = 0; k < config_.fp_per_image; ++k) {
      const auto idx = static_cast<std::uint64_t>(k);
      // Emission draws are shared across prompts, so a lower rate emits a
      // subset of the FPs of a higher one.
      if (uniform(info.id, 0, idx, kFpEmit) >= rate) continue;
      const double score =
          config_.fp_score_min + (config_.fp_score_max - config_.fp_score_min) *
                                     uniform(info.id, 0, idx, kFpScore);
      const double w = span_w * (0.05 + 0.1 * uniform(info.id, 0, idx, kFpW));
      const double h = span_h * (0.05 + 0.1 * uniform(info.id, 0, idx, kFpH));
      const double x = (span_w - w) * uniform(info.id, 0, idx, kFpX);
      const double y = (span_h - h) * uniform(info.id, 0, idx, kFpY);
      std::size_t bound = prompt_index;
      if (background && score < config_.background_absorb_below) bound = *background;
      out.detections.push_back({{x, y, w, h}, score, bound});
    }
  }

  MockConfig config_;
  GroundTruthSet gt_;
  BackendDescriptor descriptor_;
};

}  // namespace promptaxis
