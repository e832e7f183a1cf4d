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

#include <cstdlib>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "httplib.h"
#include "test_util.hpp"

namespace promptaxis {
namespace {

using testutil::error_code;

TranslationRequest pod_request() { return {flower_axes(), "cowpea pods on the plant", 3}; }

// Keeps every conversation it is shown.
class CapturingLlm final : public LlmClient {
 public:
  explicit CapturingLlm(std::vector<std::string> replies) : stub_(std::move(replies)) {}
  std::string complete(const std::vector<ChatMessage>& messages) const override {
    std::lock_guard lock(mu_);
    seen_.push_back(messages);
    return stub_.complete(messages);
  }
  std::vector<std::vector<ChatMessage>> seen() const {
    std::lock_guard lock(mu_);
    return seen_;
  }

 private:
  StubLlm stub_;
  mutable std::mutex mu_;
  mutable std::vector<std::vector<ChatMessage>> seen_;
};

TEST(Translate, ValidReplyBecomesAxisSet) {
  const StubLlm llm(StubLlm::load_replies(testutil::fixture("pod_axes_reply.json")));
  const TranslationResult r = translate_axes(pod_request(), llm);
  EXPECT_EQ(r.axes.axis(Axis::kTaxonomy).baseline, "pod");
  EXPECT_EQ(r.template_version, std::string(kTranslationTemplateVersion));
  EXPECT_EQ(r.attempts, 1);
  const auto& colors = r.axes.axis(Axis::kColor).values;
  EXPECT_NE(std::find(colors.begin(), colors.end(), "mottled"), colors.end());
  EXPECT_EQ(render_prompt(PromptSpec(), r.axes).text, "a pod");
}

TEST(Translate, MissingAxisIsASchemaViolation) {
  const StubLlm llm(StubLlm::load_replies(testutil::fixture("seven_axes_reply.json")));
  try {
    translate_axes(pod_request(), llm);
    FAIL() << "expected SchemaViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    EXPECT_NE(std::string(e.what()).find("missing axis: emoji"), std::string::npos);
  }
}

TEST(Translate, RetryFeedsValidationIssuesBack) {
  const CapturingLlm llm(StubLlm::load_replies(testutil::fixture("retry_stub.json")));
  const TranslationResult r = translate_axes(pod_request(), llm);
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(r.axes.axis(Axis::kTaxonomy).baseline, "pod");
  const auto seen = llm.seen();
  ASSERT_EQ(seen.size(), 2u);
  ASSERT_EQ(seen[1].size(), 4u);
  EXPECT_EQ(seen[1][2].role, "assistant");
  EXPECT_NE(seen[1][3].content.find("missing axis: emoji"), std::string::npos);
}

TEST(Translate, NonJsonRepliesExhaustAttempts) {
  const CapturingLlm llm({"I cannot help with that."});
  TranslationRequest req = pod_request();
  req.max_attempts = 2;
  EXPECT_EQ(error_code([&] { translate_axes(req, llm); }), ErrorCode::kSchemaViolation);
  EXPECT_EQ(llm.seen().size(), 2u);
  req.max_attempts = 0;
  EXPECT_EQ(error_code([&] { translate_axes(req, llm); }), ErrorCode::kInvalidConfig);
}

TEST(Translate, PromptIsDeterministicAndVersioned) {
  const auto a = build_translation_prompt(pod_request());
  const auto b = build_translation_prompt(pod_request());
  EXPECT_EQ(a.system, b.system);
  EXPECT_EQ(a.user, b.user);
  EXPECT_EQ(a.version, "axis-translate/v1");
  EXPECT_NE(a.user.find("cowpea pods on the plant"), std::string::npos);
  EXPECT_NE(a.user.find("axis-translate/v1"), std::string::npos);
  TranslationRequest empty = pod_request();
  empty.target_description.clear();
  EXPECT_EQ(error_code([&] { build_translation_prompt(empty); }), ErrorCode::kPrecondition);
}

TEST(Translate, ExtractsJsonFromFencedProse) {
  std::string err;
  const json j = extract_json_object("Sure:\n```json\n{\"a\": {\"b\": 1}}\n```\n", err);
  EXPECT_TRUE(err.empty());
  EXPECT_EQ(j["a"]["b"], 1);
  extract_json_object("no braces here", err);
  EXPECT_FALSE(err.empty());
}

TEST(Translate, HttpChatEndpoint) {
  const std::string reply = StubLlm::load_replies(testutil::fixture("pod_axes_reply.json")).front();
  httplib::Server server;
  std::string auth, model;
  std::mutex mu;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      auth = req.get_header_value("Authorization");
      model = json::parse(req.body).at("model").get<std::string>();
    }
    json out = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", reply}}}}})}};
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("PROMPTAXIS_TEST_KEY", "secret", 1);
  LlmEndpoint endpoint;
  endpoint.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  endpoint.model_name = "local-model";
  endpoint.api_key_env = "PROMPTAXIS_TEST_KEY";
  const HttpChatLlm llm(endpoint);
  const TranslationResult r = translate_axes(pod_request(), llm);
  EXPECT_EQ(r.axes.axis(Axis::kTaxonomy).baseline, "pod");
  {
    std::lock_guard lock(mu);
    EXPECT_EQ(auth, "Bearer secret");
    EXPECT_EQ(model, "local-model");
  }
  server.stop();
  thread.join();

  LlmEndpoint dead = endpoint;
  dead.url = "http://127.0.0.1:1/v1/chat/completions";
  EXPECT_EQ(error_code([&] { HttpChatLlm(dead).complete({{"user", "hi"}}); }),
            ErrorCode::kEndpointUnavailable);
}

}  // namespace
}  // namespace promptaxis
