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

// Word-level similarity and reward math: tokenization, word edit distance,
// sliding-window edit similarity (SWES), its sigmoid normalization, the
// composite extraction reward and ROUGE-L.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "leakforge/error.hpp"

namespace leakforge {

struct WordSeq {
  std::vector<std::string> words;
  std::string source_text;

  std::size_t size() const noexcept { return words.size(); }
  bool empty() const noexcept { return words.empty(); }
};

namespace detail {

constexpr bool is_space_byte(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and are kept inside word
// runs, so non-ASCII letters never split a word.
constexpr bool is_word_byte(unsigned char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace detail

/// Splits text into maximal letter/digit runs and standalone punctuation
/// marks. Whitespace is dropped, case is preserved.
inline WordSeq tokenize(std::string_view text) {
  WordSeq out;
  out.source_text = std::string(text);
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_space_byte(c)) {
      ++i;
    } else if (detail::is_word_byte(c)) {
      std::size_t j = i + 1;
      while (j < text.size() &&
             detail::is_word_byte(static_cast<unsigned char>(text[j])))
        ++j;
      out.words.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.words.emplace_back(1, text[i]);
      ++i;
    }
  }
  return out;
}

/// Joins words with single spaces; tokenize(join_words(w)).words == w.
inline std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

/// Levenshtein distance between two random-access sequences whose elements
/// compare with ==. Quadratic time, linear memory.
template <class A, class B>
std::size_t edit_distance(const A& a, const B& b) {
  const std::size_t n = std::size(a);
  const std::size_t m = std::size(b);
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    const auto& ai = a[i - 1];
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (ai == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::size_t word_edit_distance(const WordSeq& a, const WordSeq& b) {
  return edit_distance(a.words, b.words);
}

using TokenId = std::uint32_t;
inline constexpr TokenId kUnknownToken = std::numeric_limits<TokenId>::max();

/// String to dense id map. find() leaves the table untouched and returns
/// kUnknownToken for unseen words, which never equals an interned id.
class Interner {
 public:
  TokenId intern(std::string_view word) {
    auto it = ids_.find(std::string(word));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<TokenId>(words_.size());
    words_.emplace_back(word);
    ids_.emplace(words_.back(), id);
    return id;
  }

  TokenId find(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    return it == ids_.end() ? kUnknownToken : it->second;
  }

  std::vector<TokenId> intern_all(std::span<const std::string> words) {
    std::vector<TokenId> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(intern(w));
    return out;
  }

  std::vector<TokenId> find_all(std::span<const std::string> words) const {
    std::vector<TokenId> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(find(w));
    return out;
  }

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(TokenId id) const { return words_.at(id); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Bit-parallel edit distance (Myers/Hyyro) for patterns of at most 64
/// tokens. One instance is built per pattern and reused across texts.
class BitPattern {
 public:
  static constexpr std::size_t kMaxLength = 64;

  explicit BitPattern(std::span<const TokenId> pattern)
      : length_(pattern.size()) {
    if (length_ == 0 || length_ > kMaxLength)
      throw InvalidArgument("BitPattern length must be in [1, 64]");
    for (std::size_t i = 0; i < length_; ++i) {
      auto it = std::lower_bound(
          peq_.begin(), peq_.end(), pattern[i],
          [](const auto& e, TokenId t) { return e.first < t; });
      if (it == peq_.end() || it->first != pattern[i])
        it = peq_.insert(it, {pattern[i], 0});
      it->second |= std::uint64_t{1} << i;
    }
  }

  std::size_t length() const noexcept { return length_; }

  /// Levenshtein distance between the pattern and the whole text.
  std::size_t distance(std::span<const TokenId> text) const {
    return run(text, true);
  }

  /// Minimum distance between the pattern and any substring of text
  /// (including the empty one). Lower-bounds distance() against text and
  /// against every window of text.
  std::size_t search_min(std::span<const TokenId> text) const {
    return run(text, false);
  }

 private:
  std::uint64_t eq(TokenId t) const noexcept {
    auto it = std::lower_bound(
        peq_.begin(), peq_.end(), t,
        [](const auto& e, TokenId v) { return e.first < v; });
    return (it != peq_.end() && it->first == t) ? it->second : 0;
  }

  std::size_t run(std::span<const TokenId> text, bool global) const {
    const std::uint64_t high = std::uint64_t{1} << (length_ - 1);
    std::uint64_t pv = ~std::uint64_t{0};
    std::uint64_t mv = 0;
    std::size_t score = length_;
    std::size_t best = score;
    for (TokenId t : text) {
      const std::uint64_t e = eq(t);
      const std::uint64_t xv = e | mv;
      const std::uint64_t xh = (((e & pv) + pv) ^ pv) | e;
      std::uint64_t ph = mv | ~(xh | pv);
      std::uint64_t mh = pv & xh;
      if (ph & high)
        ++score;
      else if (mh & high)
        --score;
      ph = (ph << 1) | (global ? 1 : 0);
      mh <<= 1;
      pv = mh | ~(xv | ph);
      mv = ph & xv;
      best = std::min(best, score);
    }
    return global ? score : best;
  }

  std::size_t length_;
  std::vector<std::pair<TokenId, std::uint64_t>> peq_;
};

/// Smallest WED between d and u (when |u| < |d|) or between d and any
/// |d|-token window of u (stride 1). This is the quantity inside SWES.
inline std::size_t best_window_distance(std::span<const TokenId> u,
                                        std::span<const TokenId> d) {
  if (d.empty()) throw InvalidArgument("target word sequence is empty");
  const std::size_t m = d.size();
  if (m <= BitPattern::kMaxLength) {
    const BitPattern pattern(d);
    if (u.size() < m) return pattern.distance(u);
    std::size_t best = m;
    for (std::size_t i = 0; i + m <= u.size() && best > 0; ++i)
      best = std::min(best, pattern.distance(u.subspan(i, m)));
    return best;
  }
  if (u.size() < m) return edit_distance(u, d);
  std::size_t best = m;
  for (std::size_t i = 0; i + m <= u.size() && best > 0; ++i)
    best = std::min(best, edit_distance(u.subspan(i, m), d));
  return best;
}

inline std::size_t best_window_distance(const WordSeq& u, const WordSeq& d) {
  if (d.empty()) throw InvalidArgument("target word sequence is empty");
  Interner interner;
  const auto dv = interner.intern_all(d.words);
  const auto uv = interner.find_all(u.words);
  return best_window_distance(uv, dv);
}

/// -log(wed / |d|); +inf when wed == 0. Range [0, +inf].
inline double swes_from_distance(std::size_t wed, std::size_t target_len) {
  if (target_len == 0) throw InvalidArgument("target word sequence is empty");
  if (wed == 0) return std::numeric_limits<double>::infinity();
  return -std::log(static_cast<double>(wed) / static_cast<double>(target_len));
}

inline double swes(const WordSeq& u, const WordSeq& d) {
  return swes_from_distance(best_window_distance(u, d), d.size());
}

struct MetricParams {
  double lambda = 0.1;
  double k = 5.0;
  double x0 = 0.6;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw InvalidArgument("metric lambda must lie in [0, 1]");
    if (!(k > 0.0)) throw InvalidArgument("metric k must be positive");
    if (!std::isfinite(x0)) throw InvalidArgument("metric x0 must be finite");
  }
};

/// Logistic squashing of SWES into [0, 1]; exactly 1 at +inf.
inline double swes_norm(double s, const MetricParams& params = {}) {
  if (std::isinf(s) && s > 0) return 1.0;
  return 1.0 / (1.0 + std::exp(-params.k * (s - params.x0)));
}

/// 1 / ||u| - |d||, capped at 1 for equal lengths.
inline double length_term(std::size_t u_len, std::size_t d_len) {
  const std::size_t gap = u_len > d_len ? u_len - d_len : d_len - u_len;
  return 1.0 / static_cast<double>(std::max<std::size_t>(gap, 1));
}

struct RewardBreakdown {
  std::size_t wed = 0;
  double swes = 0.0;
  double swes_norm = 0.0;
  double length_term = 0.0;
  double diversity_bonus = 0.0;
  double total = 0.0;

  /// total without the diversity bonus.
  double base() const noexcept { return total - diversity_bonus; }

  void add_bonus(double bonus) {
    diversity_bonus += bonus;
    total += bonus;
  }
};

inline RewardBreakdown reward_from_distance(std::size_t wed, std::size_t u_len,
                                            std::size_t d_len,
                                            const MetricParams& params) {
  RewardBreakdown r;
  r.wed = wed;
  r.swes = swes_from_distance(wed, d_len);
  r.swes_norm = swes_norm(r.swes, params);
  r.length_term = length_term(u_len, d_len);
  r.total = (1.0 - params.lambda) * r.swes_norm + params.lambda * r.length_term;
  return r;
}

inline RewardBreakdown reward(const WordSeq& u, const WordSeq& d,
                              const MetricParams& params = {}) {
  return reward_from_distance(best_window_distance(u, d), u.size(), d.size(),
                              params);
}

template <class A, class B>
std::size_t lcs_length(const A& a, const B& b) {
  const std::size_t n = std::size(a);
  const std::size_t m = std::size(b);
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// ROUGE-L F1 over words. Two empty sequences count as identical.
inline double rouge_l(const WordSeq& u, const WordSeq& d) {
  if (u.empty() && d.empty()) return 1.0;
  const std::size_t lcs = lcs_length(u.words, d.words);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(u.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(d.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace leakforge
