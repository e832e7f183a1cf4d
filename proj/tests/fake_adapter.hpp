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

// In-process HTTP server speaking the detector wire protocol, backed by a
// mock backend. Used to exercise RemoteBackend without a model.

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include "httplib.h"
#include "promptaxis.hpp"

namespace testutil {

class FakeAdapter {
 public:
  FakeAdapter(promptaxis::MockConfig config, promptaxis::GroundTruthSet gt)
      : mock_(std::make_unique<promptaxis::MockBackend>(std::move(config), gt)) {
    for (const auto& img : gt.images()) paths_[img.file_name] = img.id;
    server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(healthy_ ? R"({"ok": true})" : R"({"ok": false})",
                      "application/json");
    });
    server_.Get("/v1/model", [this](const httplib::Request&, httplib::Response& res) {
      promptaxis::json j = {
          {"name", mock_->descriptor().name},
          {"supports_background_class", mock_->descriptor().supports_background_class}};
      res.set_content(j.dump(), "application/json");
    });
    server_.Post("/v1/detect", [this](const httplib::Request& req, httplib::Response& res) {
      ++detect_calls_;
      if (failures_left_ > 0) {
        --failures_left_;
        res.status = 503;
        return;
      }
      if (!raw_reply_.empty()) {
        res.set_content(raw_reply_, "application/json");
        return;
      }
      promptaxis::json body;
      try {
        body = promptaxis::json::parse(req.body);
      } catch (const promptaxis::json::exception&) {
        res.status = 400;
        return;
      }
      auto it = paths_.find(body.value("image_path", std::string()));
      if (it == paths_.end()) {
        res.status = 404;
        return;
      }
      const auto prompts = body.at("prompts").get<std::vector<std::string>>();
      const auto response = mock_->detect({it->second, it->first}, prompts);
      promptaxis::json dets = promptaxis::json::array();
      for (const auto& d : response.detections) {
        dets.push_back({{"bbox", promptaxis::bbox_to_json(d.box)},
                        {"score", d.score},
                        {"prompt_index", d.prompt_index}});
      }
      res.set_content(promptaxis::json{{"detections", dets}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeAdapter() {
    server_.stop();
    thread_.join();
  }

  FakeAdapter(const FakeAdapter&) = delete;
  FakeAdapter& operator=(const FakeAdapter&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  const promptaxis::MockBackend& mock() const { return *mock_; }
  int detect_calls() const { return detect_calls_; }

  // The next `n` detect calls answer 503.
  void fail_next(int n) { failures_left_ = n; }
  // Every detect call answers with `body` verbatim.
  void reply_with(std::string body) { raw_reply_ = std::move(body); }
  void set_healthy(bool ok) { healthy_ = ok; }

 private:
  std::unique_ptr<promptaxis::MockBackend> mock_;
  std::map<std::string, promptaxis::ImageId> paths_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> detect_calls_{0};
  std::atomic<int> failures_left_{0};
  std::atomic<bool> healthy_{true};
  std::string raw_reply_;
};

}  // namespace testutil
