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

// Client for OpenAI-compatible chat-completion endpoints.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "leakforge/target.hpp"

namespace leakforge {

inline constexpr const char* kApiKeyEnv = "LEAKFORGE_API_KEY";

/// Pulls choices[0].message.content out of a chat-completion body.
inline std::string extract_chat_content(const std::string& body) {
  const auto json = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (json.is_discarded()) throw TargetError(TargetErrorKind::kMalformedResponse, "body is not JSON");
  const auto choices = json.find("choices");
  if (choices == json.end() || !choices->is_array() || choices->empty())
    throw TargetError(TargetErrorKind::kMalformedResponse, "missing choices");
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object())
    throw TargetError(TargetErrorKind::kMalformedResponse, "missing choices[0].message");
  const auto& msg = first["message"];
  if (!msg.contains("content") || !msg["content"].is_string())
    throw TargetError(TargetErrorKind::kMalformedResponse, "missing message content");
  return msg["content"].get<std::string>();
}

class RemoteTarget final : public Target {
 public:
  explicit RemoteTarget(RemoteConfig config) : config_(std::move(config)) {
    config_.validate();
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) config_.auth_token = key;
    const auto scheme = config_.endpoint_url.find("://");
    if (scheme == std::string::npos)
      throw InvalidArgument("endpoint_url needs a scheme: " + config_.endpoint_url);
    const auto slash = config_.endpoint_url.find('/', scheme + 3);
    host_ = config_.endpoint_url.substr(0, slash);
    path_ = slash == std::string::npos ? "" : config_.endpoint_url.substr(slash);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
    slots_ = std::make_shared<std::counting_semaphore<>>(
        static_cast<std::ptrdiff_t>(config_.parallelism));
  }

  std::size_t parallelism() const override { return config_.parallelism; }

  static std::string request_body(const std::string& model, const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_prompt.empty())
      messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
    return nlohmann::json{{"model", model},
                          {"messages", messages},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_new_words}}
        .dump();
  }

  ChatResponse generate(const ChatRequest& request) const override {
    request.validate();
    const auto body = request_body(config_.model_name, request);
    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    httplib::Client client(host_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!config_.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + config_.auth_token);

    for (int attempt = 0;; ++attempt) {
      const auto retries = static_cast<std::size_t>(attempt);
      auto result = client.Post(path_, headers, body, "application/json");
      std::optional<TargetError> failure;
      if (!result) {
        const auto err = result.error();
        const bool timed_out =
            err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        failure.emplace(timed_out ? TargetErrorKind::kTimeout : TargetErrorKind::kTransport,
                        httplib::to_string(err), 0, retries);
      } else if (result->status == 429 || result->status >= 500) {
        failure.emplace(TargetErrorKind::kHttpStatus, "HTTP " + std::to_string(result->status),
                        result->status, retries);
      } else if (result->status >= 400) {
        throw TargetError(TargetErrorKind::kHttpStatus, "HTTP " + std::to_string(result->status),
                          result->status, retries);
      } else {
        try {
          return {extract_chat_content(result->body), retries};
        } catch (const TargetError& e) {
          throw TargetError(e.kind(), e.detail(), result->status, retries);
        }
      }
      if (attempt >= config_.max_retries) throw *failure;
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << attempt));
    }
  }

 private:
  RemoteConfig config_;
  std::string host_;
  std::string path_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace leakforge
