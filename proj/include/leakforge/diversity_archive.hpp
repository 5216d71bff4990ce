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

// Archive of prompts whose base reward cleared the admission threshold, and
// the novelty bonus granted to prompts unlike anything in it.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "leakforge/error.hpp"
#include "leakforge/text_metrics.hpp"

namespace leakforge {

struct DiversityParams {
  double reward_threshold = 0.9;
  double bonus = 0.2;
  double tau = 0.5;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("diversity tau must lie in (0, 1)");
    if (!(bonus >= 0.0)) throw InvalidArgument("diversity bonus must be >= 0");
    if (!std::isfinite(reward_threshold)) throw InvalidArgument("reward_threshold must be finite");
  }
};

struct ArchiveEntry {
  WordSeq prompt;
  double base_reward = 0.0;
  std::size_t episode_index = 0;
};

class Archive {
 public:
  explicit Archive(DiversityParams params = {}, MetricParams metric = {})
      : params_(params), metric_(metric) {
    params_.validate();
    metric_.validate();
  }

  const DiversityParams& params() const noexcept { return params_; }
  const std::vector<ArchiveEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Highest swes_norm(swes(prompt, entry)) over the archive; 0 when empty.
  /// Stops early once `stop_at` is reached.
  double max_similarity(const WordSeq& prompt, double stop_at = 2.0) const {
    const auto u = interner_.find_all(prompt.words);
    double best = 0.0;
    for (std::size_t i = ids_.size(); i-- > 0;) {
      best = std::max(best, similarity(u, i));
      if (best >= stop_at) break;
    }
    return best;
  }

  /// True iff some entry reaches `threshold` similarity against `prompt`.
  bool any_similar(const WordSeq& prompt, double threshold) const {
    const auto u = interner_.find_all(prompt.words);
    // Newest first: a converging policy mostly repeats recent prompts.
    for (std::size_t i = ids_.size(); i-- > 0;) {
      if (upper_similarity(u, i) < threshold) continue;
      if (similarity(u, i) >= threshold) return true;
    }
    return false;
  }

  /// The bonus for `prompt` against the current archive. Pure.
  double diversity_bonus(const WordSeq& prompt) const {
    if (entries_.empty()) return params_.bonus;
    return any_similar(prompt, params_.tau) ? 0.0 : params_.bonus;
  }

  /// True iff some archived prompt occurs verbatim inside `prompt`
  /// (similarity exactly 1).
  bool contains_entry_of(const WordSeq& prompt) const {
    const auto u = interner_.find_all(prompt.words);
    for (std::size_t i = 0; i < u.size(); ++i) {
      std::uint64_t h = kFnvBasis;
      for (std::size_t j = i; j < u.size(); ++j) {
        if (u[j] == kUnknownToken) break;
        h = fnv_step(h, u[j]);
        auto [lo, hi] = by_hash_.equal_range(h);
        for (auto it = lo; it != hi; ++it) {
          const auto& d = ids_[it->second];
          if (d.size() == j - i + 1 && std::equal(d.begin(), d.end(), u.begin() + static_cast<std::ptrdiff_t>(i)))
            return true;
        }
      }
    }
    return false;
  }

  /// Admits `prompt` iff base_reward is strictly above the threshold and no
  /// archived entry occurs verbatim inside it.
  bool maybe_add(const WordSeq& prompt, double base_reward, std::size_t episode_index) {
    if (!entries_.empty() && episode_index <= entries_.back().episode_index)
      throw InvalidArgument("archive episode indices must be strictly increasing");
    if (!(base_reward > params_.reward_threshold) || prompt.empty()) return false;
    if (contains_entry_of(prompt)) return false;
    append(prompt, base_reward, episode_index);
    return true;
  }

  /// Up to `k` entries by descending base reward; ties go to the earlier episode.
  std::vector<ArchiveEntry> top(std::size_t k) const {
    std::vector<ArchiveEntry> sorted = entries_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.base_reward != b.base_reward ? a.base_reward > b.base_reward
                                            : a.episode_index < b.episode_index;
    });
    if (sorted.size() > k) sorted.resize(k);
    return sorted;
  }

  /// Size of a greedy subset (archive order) whose members are pairwise
  /// below `threshold` in symmetric normalized similarity.
  std::size_t distinct_count(double threshold = 0.8) const {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      bool novel = true;
      // Near-duplicates cluster in time, so the latest kept entries go first.
      for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
        if (pair_at_least(i, *it, threshold)) {
          novel = false;
          break;
        }
      }
      if (novel) kept.push_back(i);
    }
    return kept.size();
  }

  void save_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write archive " + path.string());
    for (const auto& e : entries_) {
      out << nlohmann::json{{"prompt", e.prompt.source_text},
                            {"base_reward", e.base_reward},
                            {"episode_index", e.episode_index}}
                 .dump()
          << '\n';
    }
  }

  /// Loads a JSON Lines export. Entries are taken as-is (no admission test)
  /// but must keep increasing episode indices.
  static Archive load_jsonl(const std::filesystem::path& path, DiversityParams params = {},
                            MetricParams metric = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open archive " + path.string());
    Archive a(params, metric);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("prompt") || !j["prompt"].is_string() ||
          !j.contains("base_reward") || !j["base_reward"].is_number() ||
          !j.contains("episode_index") || !j["episode_index"].is_number_unsigned())
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed archive entry");
      const auto ep = j["episode_index"].get<std::size_t>();
      if (!a.entries_.empty() && ep <= a.entries_.back().episode_index)
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": episode_index not increasing");
      a.append(tokenize(j["prompt"].get<std::string>()), j["base_reward"].get<double>(), ep);
    }
    return a;
  }

 private:
  static constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

  static std::uint64_t fnv_step(std::uint64_t h, TokenId t) {
    for (int b = 0; b < 4; ++b) {
      h ^= (static_cast<std::uint64_t>(t) >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  void append(const WordSeq& prompt, double base_reward, std::size_t episode_index) {
    entries_.push_back({prompt, base_reward, episode_index});
    ids_.push_back(interner_.intern_all(prompt.words));
    const auto& d = ids_.back();
    if (!d.empty() && d.size() <= BitPattern::kMaxLength) patterns_.emplace_back(std::in_place, d);
    else patterns_.emplace_back();
    std::uint64_t h = kFnvBasis;
    for (auto t : d) h = fnv_step(h, t);
    if (!d.empty()) by_hash_.emplace(h, ids_.size() - 1);
  }

  double norm_of(std::size_t wed, std::size_t len) const {
    return swes_norm(swes_from_distance(wed, len), metric_);
  }

  /// swes_norm(swes(u, entry i)).
  double similarity(std::span<const TokenId> u, std::size_t i) const {
    const auto& d = ids_[i];
    if (d.empty()) return 0.0;
    const auto& p = patterns_[i];
    if (!p) return norm_of(best_window_distance(u, d), d.size());
    const std::size_t m = d.size();
    if (u.size() < m) return norm_of(p->distance(u), m);
    std::size_t best = m;
    for (std::size_t s = 0; s + m <= u.size() && best > 0; ++s)
      best = std::min(best, p->distance(u.subspan(s, m)));
    return norm_of(best, m);
  }

  /// Cheap upper bound on similarity(u, i): the best substring of any
  /// length is at least as close as the best fixed-length window.
  double upper_similarity(std::span<const TokenId> u, std::size_t i) const {
    const auto& p = patterns_[i];
    if (!p || u.size() < ids_[i].size()) return 1.0;
    return norm_of(p->search_min(u), ids_[i].size());
  }

  bool pair_at_least(std::size_t i, std::size_t j, double threshold) const {
    auto one = [&](std::size_t a, std::size_t b) {
      return upper_similarity(ids_[a], b) >= threshold && similarity(ids_[a], b) >= threshold;
    };
    return one(i, j) || one(j, i);
  }

  DiversityParams params_;
  MetricParams metric_;
  std::vector<ArchiveEntry> entries_;
  Interner interner_;
  std::vector<std::vector<TokenId>> ids_;
  std::vector<std::optional<BitPattern>> patterns_;
  std::unordered_multimap<std::uint64_t, std::size_t> by_hash_;
};

}  // namespace leakforge
