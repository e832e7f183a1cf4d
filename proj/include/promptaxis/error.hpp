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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptaxis {

enum class ErrorCode {
  kInvalidAxisSet,
  kInvalidSpec,
  kEmptyRender,
  kMissingScore,
  kPrecondition,
  kParseError,
  kDanglingAnnotation,
  kZeroAreaBox,
  kScoreOutOfRange,
  kUnknownImage,
  kUnknownPrompt,
  kMissingPrediction,
  kRemoteUnavailable,
  kRemoteSchemaError,
  kSchemaViolation,
  kEndpointUnavailable,
  kInvalidConfig,
  kBaselineFailed,
  kEmptyLedger,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidAxisSet: return "InvalidAxisSet";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kEmptyRender: return "EmptyRender";
    case ErrorCode::kMissingScore: return "MissingScore";
    case ErrorCode::kPrecondition: return "PreconditionViolation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDanglingAnnotation: return "DanglingAnnotation";
    case ErrorCode::kZeroAreaBox: return "ZeroAreaBox";
    case ErrorCode::kScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::kUnknownImage: return "UnknownImage";
    case ErrorCode::kUnknownPrompt: return "UnknownPrompt";
    case ErrorCode::kMissingPrediction: return "MissingPrediction";
    case ErrorCode::kRemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::kRemoteSchemaError: return "RemoteSchemaError";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kEndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kBaselineFailed: return "BaselineFailed";
    case ErrorCode::kEmptyLedger: return "EmptyLedger";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

// All engine failures surface as this type; code() identifies the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace promptaxis
