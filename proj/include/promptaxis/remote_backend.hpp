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

// HTTP client for the detector wire protocol:
//   POST /v1/detect  {"image_path", "prompts"} -> {"detections": [...]}
//   GET  /v1/health  -> {"ok": true}
//   GET  /v1/model   -> {"name", "supports_background_class"}

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "promptaxis/backend.hpp"

namespace promptaxis {

struct RemoteOptions {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{60};
  std::size_t max_concurrency = 1;
};

// Splits "http://host:port/prefix" into the client origin and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "remote URL needs a scheme: " + url);
  }
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

inline DetectResponse parse_detect_response(const std::string& body,
                                            std::size_t prompt_count) {
  DetectResponse response;
  try {
    json doc = json::parse(body);
    for (const json& d : doc.at("detections")) {
      Detection det;
      det.box = bbox_from_json(d.at("bbox"), "detection");
      det.score = d.at("score").get<double>();
      det.prompt_index = d.at("prompt_index").get<std::size_t>();
      response.detections.push_back(det);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kRemoteSchemaError, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kRemoteSchemaError, e.what());
  }
  check_response(response, prompt_count, ErrorCode::kRemoteSchemaError);
  return response;
}

class RemoteBackend final : public Backend {
 public:
  RemoteBackend(BackendDescriptor descriptor, RemoteOptions options = {})
      : descriptor_(std::move(descriptor)), options_(options) {
    descriptor_.kind = BackendKind::kRemote;
    if (descriptor_.base_url.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "remote backend needs a base URL");
    }
    std::tie(origin_, prefix_) = split_base_url(descriptor_.base_url);
  }

  // Checks /v1/health and reads /v1/model to fill in the descriptor.
  static RemoteBackend connect(const std::string& base_url,
                               RemoteOptions options = {}) {
    BackendDescriptor d;
    d.base_url = base_url;
    d.name = base_url;
    d.max_concurrency = options.max_concurrency;
    RemoteBackend probe(d, options);
    json health = probe.get_json("/v1/health");
    if (!health.is_object() || !health.value("ok", false)) {
      throw Error(ErrorCode::kRemoteUnavailable, base_url + " reports not ok");
    }
    json model = probe.get_json("/v1/model");
    try {
      d.name = model.at("name").get<std::string>();
      d.supports_background_class =
          model.at("supports_background_class").get<bool>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kRemoteSchemaError, std::string("/v1/model: ") + e.what());
    }
    return RemoteBackend(d, options);
  }

  const BackendDescriptor& descriptor() const override { return descriptor_; }

  DetectResponse detect(const ImageRef& image,
                        std::span<const std::string> prompts) const override {
    json body = {{"image_path", image.path},
                 {"prompts", std::vector<std::string>(prompts.begin(), prompts.end())}};
    std::string text = with_retries([&](httplib::Client& cli) {
      return cli.Post(prefix_ + "/v1/detect", body.dump(), "application/json");
    }, "/v1/detect");
    return parse_detect_response(text, prompts.size());
  }

 private:
  json get_json(const std::string& path) const {
    std::string text = with_retries(
        [&](httplib::Client& cli) { return cli.Get(prefix_ + path); }, path);
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kRemoteSchemaError, path + ": " + e.what());
    }
  }

  // Transport failures and 5xx are retried with exponential backoff; other
  // non-200 statuses are schema errors.
  template <typename Call>
  std::string with_retries(Call&& call, const std::string& what) const {
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
      httplib::Client cli(origin_);
      cli.set_connection_timeout(options_.timeout);
      cli.set_read_timeout(options_.timeout);
      cli.set_write_timeout(options_.timeout);
      auto res = call(cli);
      if (res && res->status == 200) return res->body;
      if (res && res->status < 500) {
        throw Error(ErrorCode::kRemoteSchemaError,
                    what + " returned HTTP " + std::to_string(res->status) +
                        ": " + res->body);
      }
      last_error = res ? "HTTP " + std::to_string(res->status)
                       : httplib::to_string(res.error());
      if (attempt < options_.attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    throw Error(ErrorCode::kRemoteUnavailable,
                descriptor_.base_url + what + " failed after " +
                    std::to_string(options_.attempts) + " attempts: " + last_error);
  }

  BackendDescriptor descriptor_;
  RemoteOptions options_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace promptaxis
