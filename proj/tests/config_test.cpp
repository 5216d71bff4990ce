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

#include <filesystem>

#include "leakforge/config.hpp"

#ifndef LEAKFORGE_SOURCE_DIR
#error "LEAKFORGE_SOURCE_DIR must be defined"
#endif

namespace leakforge {
namespace {

TEST(YamlConfig, NestedSectionsOverrideDefaults) {
  const auto c = parse_config(R"(
mode: sysprompt
seed: 9
query_budget: 500
target:
  temperature: 0.5
  sim:
    leak_triggers: ["word for word", "copy and paste"]
    trigger_hits_required: 1
ppo:
  learning_rate: 1e-3
  normalize_advantages: false
)");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.query_budget, 500u);
  EXPECT_DOUBLE_EQ(c.target.temperature, 0.5);
  EXPECT_EQ(c.target.sim.model.leak_triggers.size(), 2u);
  EXPECT_EQ(c.target.sim.model.trigger_hits_required, 1u);
  EXPECT_DOUBLE_EQ(c.ppo.learning_rate, 1e-3);
  EXPECT_FALSE(c.ppo.normalize_advantages);
  EXPECT_EQ(c.generation.initial_prompt, tokenize(kSyspromptInitialPrompt).words);
}

TEST(YamlConfig, QuotedScalarsStayStrings) {
  const auto c = parse_config("mode: training_data\ntraining_data:\n  initial_pattern: \"%\"\ntarget:\n  sim:\n    refusal_text: \"42\"\n");
  EXPECT_EQ(c.generation.initial_prompt, std::vector<std::string>(30, "%"));
  EXPECT_EQ(c.target.sim.model.refusal_text, "42");
}

TEST(YamlConfig, ErrorsAreConfigErrors) {
  EXPECT_THROW(parse_config("mode: [unclosed"), ConfigError);
  EXPECT_THROW(parse_config("eval:\n  shares_budget: maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("- a\n- b\n"), ConfigError);
  EXPECT_THROW(parse_config("target:\n  backend: carrier_pigeon\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/leakforge.yaml"), ConfigError);
}

TEST(YamlConfig, EmptyDocumentIsAllDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(config_hash(c), config_hash(CampaignConfig::defaults(Mode::kSysprompt)));
}

TEST(YamlConfig, ShippedConfigsParse) {
  const std::filesystem::path dir = std::filesystem::path(LEAKFORGE_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".yaml") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path()));
    ++n;
  }
  EXPECT_GE(n, 3u);
}

TEST(YamlConfig, RemoteBackendNeedsEndpoint) {
  const auto c = parse_config(
      "target:\n  backend: remote\n  remote:\n    endpoint_url: \"http://127.0.0.1:9/v1\"\n    model_name: m\n");
  EXPECT_EQ(c.target.backend, "remote");
  EXPECT_THROW(parse_config("target:\n  backend: remote\n"), ConfigError);
}

}  // namespace
}  // namespace leakforge
