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

// YAML (or JSON) campaign config files.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "leakforge/campaign.hpp"
#include "leakforge/error.hpp"
#include "leakforge/remote_target.hpp"

namespace leakforge {

namespace detail {

inline nlohmann::json yaml_scalar(const YAML::Node& n) {
  const auto& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (!s.empty()) {
    std::int64_t i = 0;
    std::size_t used = 0;
    try {
      i = std::stoll(s, &used, 10);
      if (used == s.size()) {
        if (i >= 0) return static_cast<std::uint64_t>(i);
        return i;
      }
    } catch (const std::exception&) {
    }
    try {
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return s;
}

inline nlohmann::json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return yaml_scalar(n);
    case YAML::NodeType::Sequence: {
      auto a = nlohmann::json::array();
      for (const auto& e : n) a.push_back(yaml_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      auto o = nlohmann::json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

}  // namespace detail

/// Parses config text; JSON is accepted too since it is valid YAML.
inline CampaignConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  auto j = detail::yaml_to_json(root);
  if (j.is_null()) j = nlohmann::json::object();
  return campaign_config_from_json(j);
}

inline CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// make_environment with the HTTP backend available.
inline CampaignEnvironment make_full_environment(const CampaignConfig& config) {
  return make_environment(config, [](const RemoteConfig& rc) -> std::shared_ptr<const Target> {
    try {
      return std::make_shared<const RemoteTarget>(rc);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  });
}

}  // namespace leakforge
