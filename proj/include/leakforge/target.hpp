// Copyright 2026 The LeakForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "leakforge/error.hpp"

namespace leakforge {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 1.0;
  std::size_t max_new_words = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
    if (max_new_words < 1) throw InvalidArgument("max_new_words must be >= 1");
  }
};

struct ChatResponse {
  std::string text;
  std::size_t retries = 0;
};

enum class TargetErrorKind { kTimeout, kHttpStatus, kMalformedResponse, kTransport };

inline const char* to_string(TargetErrorKind kind) {
  switch (kind) {
    case TargetErrorKind::kTimeout: return "timeout";
    case TargetErrorKind::kHttpStatus: return "http_status";
    case TargetErrorKind::kMalformedResponse: return "malformed_response";
    case TargetErrorKind::kTransport: return "transport";
  }
  return "unknown";
}

class TargetError : public Error {
 public:
  TargetError(TargetErrorKind kind, const std::string& what, int status = 0,
              std::size_t retries = 0)
      : Error(std::string(to_string(kind)) + ": " + what),
        kind_(kind), detail_(what), status_(status), retries_(retries) {}

  TargetErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  int status() const noexcept { return status_; }
  std::size_t retries() const noexcept { return retries_; }

 private:
  TargetErrorKind kind_;
  std::string detail_;
  int status_;
  std::size_t retries_;
};

// A model under attack. Implementations must be safe to call concurrently
// from up to parallelism() threads.
class Target {
 public:
  virtual ~Target() = default;
  virtual ChatResponse generate(const ChatRequest& request) const = 0;
  virtual std::size_t parallelism() const { return 1; }
};

/// Connection settings for an OpenAI-compatible chat endpoint.
struct RemoteConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string auth_token;
  int timeout_ms = 30000;
  int max_retries = 3;
  std::size_t parallelism = 4;
  int backoff_ms = 500;

  void validate() const {
    if (endpoint_url.empty()) throw InvalidArgument("remote endpoint_url is empty");
    if (model_name.empty()) throw InvalidArgument("remote model_name is empty");
    if (timeout_ms <= 0) throw InvalidArgument("remote timeout_ms must be positive");
    if (max_retries < 0) throw InvalidArgument("remote max_retries must be >= 0");
    if (parallelism < 1) throw InvalidArgument("remote parallelism must be >= 1");
    if (backoff_ms < 0) throw InvalidArgument("remote backoff_ms must be >= 0");
  }
};

}  // namespace leakforge
