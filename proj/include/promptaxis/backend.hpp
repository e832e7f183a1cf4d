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

// Detector backend interface, the cached-file backend, a recording
// decorator, and background-class regularization.

#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptaxis/detection.hpp"

namespace promptaxis {

enum class BackendKind { kCached, kRemote, kMock };

inline std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCached: return "cached";
    case BackendKind::kRemote: return "remote";
    case BackendKind::kMock: return "mock";
  }
  return "";
}

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::kMock;
  bool supports_background_class = false;
  std::size_t max_concurrency = 1;
  // Remote backends only.
  std::string base_url;
};

// `path` is what a remote adapter resolves; cached and mock backends key on
// `id`.
struct ImageRef {
  ImageId id = 0;
  std::string path;
};

struct Detection {
  BBox box;
  double score = 0;
  std::size_t prompt_index = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectResponse {
  std::vector<Detection> detections;

  friend bool operator==(const DetectResponse&, const DetectResponse&) = default;
};

// Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  virtual DetectResponse detect(const ImageRef& image,
                                std::span<const std::string> prompts) const = 0;
};

// Throws `code` if any detection violates the response invariants.
inline void check_response(const DetectResponse& response,
                           std::size_t prompt_count, ErrorCode code) {
  for (const auto& d : response.detections) {
    if (d.prompt_index >= prompt_count) {
      throw Error(code, "prompt_index " + std::to_string(d.prompt_index) +
                            " out of range for " + std::to_string(prompt_count) +
                            " prompts");
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw Error(code, "score " + std::to_string(d.score) + " outside [0,1]");
    }
    if (!d.box.has_positive_area()) throw Error(code, "degenerate bbox");
  }
}

class CachedBackend final : public Backend {
 public:
  explicit CachedBackend(DetectionSet cache, std::string name = "cached",
                         std::size_t max_concurrency = 4)
      : cache_(std::move(cache)) {
    descriptor_.name = std::move(name);
    descriptor_.kind = BackendKind::kCached;
    descriptor_.max_concurrency = max_concurrency;
  }

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  const DetectionSet& cache() const { return cache_; }

  DetectResponse detect(const ImageRef& image,
                        std::span<const std::string> prompts) const override {
    DetectResponse response;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto* boxes = cache_.find(image.id, prompts[i]);
      if (!boxes) {
        throw Error(ErrorCode::kMissingPrediction,
                    "no cached prediction for image " + std::to_string(image.id) +
                        " prompt \"" + prompts[i] + "\"");
      }
      for (const auto& b : *boxes) response.detections.push_back({b.box, b.score, i});
    }
    return response;
  }

 private:
  DetectionSet cache_;
  BackendDescriptor descriptor_;
};

// Forwards to an inner backend and keeps every response, so that a run can
// later be replayed through a CachedBackend.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<const Backend> inner)
      : inner_(std::move(inner)) {}

  const BackendDescriptor& descriptor() const override {
    return inner_->descriptor();
  }

  DetectResponse detect(const ImageRef& image,
                        std::span<const std::string> prompts) const override {
    DetectResponse response = inner_->detect(image, prompts);
    std::vector<std::vector<ScoredBox>> per_prompt(prompts.size());
    for (const auto& d : response.detections) {
      per_prompt[d.prompt_index].push_back({d.box, d.score});
    }
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (prompts[i].empty()) continue;
      recorded_.set(image.id, prompts[i], std::move(per_prompt[i]));
    }
    return response;
  }

  DetectionSet recorded() const {
    std::lock_guard lock(mu_);
    return recorded_;
  }

 private:
  std::shared_ptr<const Backend> inner_;
  mutable std::mutex mu_;
  mutable DetectionSet recorded_;
};

enum class BackgroundStatus { kApplied, kUnsupported, kDisabled };

struct BackgroundPlan {
  std::vector<std::string> wire_prompts;
  std::optional<std::size_t> background_index;
  BackgroundStatus status = BackgroundStatus::kDisabled;

  // Drops detections bound to the appended background slot.
  DetectResponse filter(DetectResponse response) const {
    if (!background_index) return response;
    std::erase_if(response.detections, [&](const Detection& d) {
      return d.prompt_index == *background_index;
    });
    return response;
  }
};

// Appends "" as a catch-all class competing with the real prompts. When the
// backend lacks the capability the prompts pass through untouched and the
// status records why.
inline BackgroundPlan apply_background_class(std::vector<std::string> prompts,
                                             const BackendDescriptor& backend) {
  if (prompts.empty()) {
    throw Error(ErrorCode::kPrecondition, "background class needs at least one prompt");
  }
  for (const auto& p : prompts) {
    if (p.empty()) {
      throw Error(ErrorCode::kPrecondition, "prompt list already contains \"\"");
    }
  }
  BackgroundPlan plan;
  plan.wire_prompts = std::move(prompts);
  if (!backend.supports_background_class) {
    plan.status = BackgroundStatus::kUnsupported;
    return plan;
  }
  plan.background_index = plan.wire_prompts.size();
  plan.wire_prompts.emplace_back();
  plan.status = BackgroundStatus::kApplied;
  return plan;
}

// Detections for a single prompt, with the background absorber attached
// when requested and supported.
inline std::vector<ScoredBox> detect_single_prompt(const Backend& backend,
                                                   const ImageRef& image,
                                                   const std::string& prompt,
                                                   bool use_background) {
  std::vector<std::string> prompts{prompt};
  BackgroundPlan plan;
  if (use_background) {
    plan = apply_background_class(std::move(prompts), backend.descriptor());
  } else {
    plan.wire_prompts = std::move(prompts);
  }
  DetectResponse response =
      plan.filter(backend.detect(image, plan.wire_prompts));
  std::vector<ScoredBox> out;
  for (const auto& d : response.detections) {
    if (d.prompt_index == 0) out.push_back({d.box, d.score});
  }
  return out;
}

}  // namespace promptaxis
