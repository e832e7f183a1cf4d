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

// LLM-driven translation of an axis set to a new target object. The LLM sits
// behind LlmClient; a file-backed stub and a chat-completions HTTP client
// are provided.

#pragma once

#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "promptaxis/axis.hpp"
#include "promptaxis/remote_backend.hpp"

namespace promptaxis {

inline constexpr std::string_view kTranslationTemplateVersion = "axis-translate/v1";

struct ChatMessage {
  std::string role;
  std::string content;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) const = 0;
};

// Replays canned replies. A stub file holding a JSON array yields its
// elements in order (the last one repeats); any other content is returned
// verbatim on every call.
class StubLlm final : public LlmClient {
 public:
  explicit StubLlm(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "stub LLM needs at least one reply");
    }
  }

  static StubLlm from_file(const std::string& path) { return StubLlm(load_replies(path)); }

  static std::vector<std::string> load_replies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kEndpointUnavailable, "cannot open stub " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_array()) {
      std::vector<std::string> replies;
      for (const json& r : doc) replies.push_back(r.is_string() ? r.get<std::string>() : r.dump(2));
      return replies;
    }
    return {text};
  }

  std::string complete(const std::vector<ChatMessage>&) const override {
    std::lock_guard lock(mu_);
    const std::string& reply = replies_[std::min(next_, replies_.size() - 1)];
    ++next_;
    return reply;
  }

 private:
  std::vector<std::string> replies_;
  mutable std::mutex mu_;
  mutable std::size_t next_ = 0;
};

struct LlmEndpoint {
  // Full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string url;
  std::string model_name;
  // Name of the environment variable holding the API key; may be empty.
  std::string api_key_env;
  double temperature = 0.0;
  std::chrono::seconds timeout{120};
};

class HttpChatLlm final : public LlmClient {
 public:
  explicit HttpChatLlm(LlmEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    std::tie(origin_, path_) = split_base_url(endpoint_.url);
    if (path_.empty()) path_ = "/v1/chat/completions";
  }

  std::string complete(const std::vector<ChatMessage>& messages) const override {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", endpoint_.model_name},
                 {"messages", std::move(msgs)},
                 {"temperature", endpoint_.temperature}};
    httplib::Client cli(origin_);
    cli.set_read_timeout(endpoint_.timeout);
    httplib::Headers headers;
    if (!endpoint_.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::kEndpointUnavailable,
                  endpoint_.url + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kEndpointUnavailable,
                  endpoint_.url + " returned HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body)
          .at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kEndpointUnavailable,
                  std::string("malformed chat completion: ") + e.what());
    }
  }

 private:
  LlmEndpoint endpoint_;
  std::string origin_;
  std::string path_;
};

struct TranslationRequest {
  AxisSet source;
  std::string target_description;
  int max_attempts = 3;
};

struct TranslationPrompt {
  std::string version;
  std::string system;
  std::string user;
};

inline TranslationPrompt build_translation_prompt(const TranslationRequest& req) {
  if (req.target_description.empty()) {
    throw Error(ErrorCode::kPrecondition, "target description is empty");
  }
  TranslationPrompt p;
  p.version = std::string(kTranslationTemplateVersion);
  p.system =
      "You adapt structured text-prompt axes for a zero-shot open-vocabulary "
      "object detector to a new target object. You answer with a single JSON "
      "document and nothing else.";
  std::ostringstream user;
  user << "[template " << p.version << "]\n"
       << "Source target: " << req.source.target_name() << "\n"
       << "New target: " << req.target_description << "\n\n"
       << "Source axes:\n" << req.source.to_json().dump(2) << "\n\n"
       << "Rewrite every axis for the new target:\n"
       << "- Keep exactly these eight axes: grammar, size, color, taxonomy, "
          "anatomy, phenology, negation, emoji.\n"
       << "- Each axis has a \"baseline\" string (\"\" means the slot is "
          "omitted) and a \"values\" list of alternatives. No duplicates within "
          "an axis, and no value may equal the baseline.\n"
       << "- The taxonomy baseline must be a non-empty head noun for the new "
          "target; taxonomy values are more specific names for it.\n"
       << "- Color, size, anatomy and phenology values describe the new "
          "target's appearance, parts and growth stages.\n"
       << "- Negation values are literal clauses such as \"not a leaf, not a "
          "stem\" naming the structures most easily confused with the new "
          "target.\n"
       << "- Emoji values are literal Unicode emoji related to the new target.\n"
       << "- Grammar values are article or framing phrases; keep the source "
          "grammar axis unless it does not fit.\n\n"
       << "Output schema:\n"
       << "{\"target\": string, \"axes\": {<axis name>: {\"baseline\": string, "
          "\"values\": [string, ...]}}}\n";
  p.user = user.str();
  return p;
}

// Pulls a JSON object out of a reply that may wrap it in prose or fences.
inline json extract_json_object(const std::string& reply, std::string& error) {
  auto open = reply.find('{');
  auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    error = "reply contains no JSON object";
    return nullptr;
  }
  try {
    return json::parse(reply.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    error = std::string("reply is not valid JSON: ") + e.what();
    return nullptr;
  }
}

struct TranslationResult {
  AxisSet axes;
  std::string template_version;
  int attempts = 0;
};

// Re-prompts with the validation errors until the reply validates or the
// attempt limit is reached; never returns a partially valid set.
inline TranslationResult translate_axes(const TranslationRequest& req,
                                        const LlmClient& llm) {
  if (req.max_attempts < 1) {
    throw Error(ErrorCode::kInvalidConfig, "max_attempts must be >= 1");
  }
  const TranslationPrompt prompt = build_translation_prompt(req);
  std::vector<ChatMessage> messages{{"system", prompt.system},
                                    {"user", prompt.user}};
  std::vector<std::string> issues;
  for (int attempt = 1; attempt <= req.max_attempts; ++attempt) {
    const std::string reply = llm.complete(messages);
    std::string parse_error;
    json doc = extract_json_object(reply, parse_error);
    issues = parse_error.empty() ? AxisSet::validate(doc)
                                 : std::vector<std::string>{parse_error};
    if (issues.empty()) {
      return {AxisSet::from_json(doc), prompt.version, attempt};
    }
    std::string feedback = "The document failed validation:\n";
    for (const auto& issue : issues) feedback += "- " + issue + "\n";
    feedback += "Return the corrected JSON document only.";
    messages.push_back({"assistant", reply});
    messages.push_back({"user", std::move(feedback)});
  }
  std::string joined;
  for (const auto& issue : issues) joined += (joined.empty() ? "" : "; ") + issue;
  throw Error(ErrorCode::kSchemaViolation,
              "after " + std::to_string(req.max_attempts) + " attempts: " + joined);
}

}  // namespace promptaxis
