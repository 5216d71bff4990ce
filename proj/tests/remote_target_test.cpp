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

#include <gtest/gtest.h>

#include <atomic>
#include <future>

#include "leakforge/remote_target.hpp"

namespace leakforge {
namespace {

class MockServer {
 public:
  explicit MockServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  RemoteConfig config() const {
    RemoteConfig c;
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
    c.model_name = "mock-model";
    c.auth_token = "token-123";
    c.timeout_ms = 2000;
    c.max_retries = 3;
    c.backoff_ms = 1;
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

TEST(ExtractChatContent, Examples) {
  EXPECT_EQ(extract_chat_content(completion("hi there")), "hi there");
  try {
    extract_chat_content(R"({"id": "x"})");
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kMalformedResponse);
  }
  EXPECT_THROW(extract_chat_content("not json"), TargetError);
  EXPECT_THROW(extract_chat_content(R"({"choices": []})"), TargetError);
  EXPECT_THROW(extract_chat_content(R"({"choices": [{"message": {}}]})"), TargetError);
}

TEST(RemoteConfig, Validation) {
  RemoteConfig c{"http://x", "m", "", 0};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.timeout_ms = 10;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(RemoteTarget(RemoteConfig{"no-scheme", "m"}), InvalidArgument);
}

TEST(RemoteTarget, SendsWireFormatAndReadsFirstChoice) {
  nlohmann::json seen;
  std::string auth;
  MockServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion("leaked text"), "application/json");
  });
  RemoteTarget target(server.config());
  const auto out = target.generate({"sys", "user text", 0.7, 32, 1});
  EXPECT_EQ(out.text, "leaked text");
  EXPECT_EQ(out.retries, 0u);
  EXPECT_EQ(auth, "Bearer token-123");
  EXPECT_EQ(seen["model"], "mock-model");
  EXPECT_EQ(seen["max_tokens"], 32);
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.7);
  ASSERT_EQ(seen["messages"].size(), 2u);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "user text");
}

TEST(RemoteTarget, RetriesAfterRateLimit) {
  std::atomic<int> calls = 0;
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 429;
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  RemoteTarget target(server.config());
  const auto out = target.generate({"", "p", 1.0, 8, 0});
  EXPECT_EQ(out.text, "ok");
  EXPECT_EQ(out.retries, 1u);
}

TEST(RemoteTarget, DistinctErrorKinds) {
  MockServer bad_status([](const httplib::Request&, httplib::Response& res) { res.status = 403; });
  try {
    RemoteTarget(bad_status.config()).generate({"", "p", 1.0, 8, 0});
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kHttpStatus);
    EXPECT_EQ(e.status(), 403);
    EXPECT_EQ(e.retries(), 0u);
  }

  MockServer always_busy([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  try {
    RemoteTarget(always_busy.config()).generate({"", "p", 1.0, 8, 0});
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kHttpStatus);
    EXPECT_EQ(e.retries(), 3u);
  }

  MockServer malformed([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"object": "chat.completion"})", "application/json");
  });
  try {
    RemoteTarget(malformed.config()).generate({"", "p", 1.0, 8, 0});
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kMalformedResponse);
  }

  MockServer slow([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    res.set_content(completion("late"), "application/json");
  });
  auto config = slow.config();
  config.timeout_ms = 50;
  config.max_retries = 0;
  try {
    RemoteTarget(config).generate({"", "p", 1.0, 8, 0});
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kTimeout);
  }

  config.endpoint_url = "http://127.0.0.1:1/v1";
  try {
    RemoteTarget(config).generate({"", "p", 1.0, 8, 0});
    FAIL();
  } catch (const TargetError& e) {
    EXPECT_EQ(e.kind(), TargetErrorKind::kTransport);
  }
}

TEST(RemoteTarget, BoundsInFlightRequests) {
  std::atomic<int> in_flight = 0, peak = 0;
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(completion("x"), "application/json");
  });
  auto config = server.config();
  config.parallelism = 2;
  RemoteTarget target(config);
  std::vector<std::future<ChatResponse>> futures;
  for (int i = 0; i < 8; ++i)
    futures.push_back(std::async(std::launch::async, [&] { return target.generate({"", "p", 1.0, 8, 0}); }));
  for (auto& f : futures) EXPECT_EQ(f.get().text, "x");
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(RemoteTarget, EnvironmentOverridesToken) {
  std::string auth;
  MockServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.set_content(completion("x"), "application/json");
  });
  ::setenv(kApiKeyEnv, "from-env", 1);
  RemoteTarget target(server.config());
  ::unsetenv(kApiKeyEnv);
  target.generate({"", "p", 1.0, 8, 0});
  EXPECT_EQ(auth, "Bearer from-env");
}

}  // namespace
}  // namespace leakforge
