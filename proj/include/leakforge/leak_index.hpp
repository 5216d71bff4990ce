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

// Exact longest-common-span search between a model output and a training
// corpus, at word granularity. Built on a suffix array over interned word
// ids with one unique separator per document, so no match can straddle two
// documents. Ties are resolved with a sparse-table range minimum over the
// suffix array: global offsets grow with (doc_id, position), so the minimum
// offset in a suffix interval is the lowest doc and the earliest span.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leakforge/error.hpp"
#include "leakforge/text_metrics.hpp"

namespace leakforge {

struct Corpus {
  std::vector<std::string> docs;
  std::size_t total_words = 0;

  std::size_t size() const noexcept { return docs.size(); }

  /// Drops documents that tokenize to nothing; ids stay dense.
  static Corpus from_documents(std::vector<std::string> texts) {
    Corpus c;
    for (auto& t : texts) {
      const auto n = tokenize(t).size();
      if (n == 0) continue;
      c.total_words += n;
      c.docs.push_back(std::move(t));
    }
    return c;
  }

  /// A regular file holds one document per line; a directory holds one
  /// document per regular file, taken in file-name order.
  static Corpus load(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::vector<std::string> texts;
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw IoError("cannot read " + f.string());
        texts.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      }
    } else {
      std::ifstream in(path);
      if (!in) throw IoError("cannot read corpus " + path.string());
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        texts.push_back(std::move(line));
      }
    }
    return from_documents(std::move(texts));
  }
};

struct IndexParams {
  std::size_t min_match_words = 8;
  std::size_t saturation_words = 32;

  void validate() const {
    if (min_match_words < 2) throw InvalidArgument("min_match_words must be >= 2");
    if (saturation_words < min_match_words)
      throw InvalidArgument("saturation_words must be >= min_match_words");
  }
};

struct MatchResult {
  std::size_t doc_id = 0;
  std::size_t doc_begin = 0;  // [doc_begin, doc_end) in document words
  std::size_t doc_end = 0;
  std::size_t query_begin = 0;  // [query_begin, query_end) in query words
  std::size_t query_end = 0;
  std::size_t matched_words = 0;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// 0 without a match, otherwise min(1, matched_words / saturation_words).
inline double stage1_reward(const std::optional<MatchResult>& match,
                            const IndexParams& params) {
  if (!match) return 0.0;
  return std::min(1.0, static_cast<double>(match->matched_words) /
                           static_cast<double>(params.saturation_words));
}

class CorpusIndex {
 public:
  static constexpr char kMagic[8] = {'L', 'F', 'I', 'N', 'D', 'E', 'X', '\0'};
  static constexpr std::uint32_t kVersion = 1;

  static CorpusIndex build(const Corpus& corpus, const IndexParams& params = {}) {
    params.validate();
    if (corpus.docs.empty()) throw InvalidArgument("cannot index an empty corpus");
    CorpusIndex index;
    index.params_ = params;
    index.docs_ = corpus.docs;
    index.build_structures();
    return index;
  }

  const IndexParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return docs_.size(); }
  std::size_t total_words() const noexcept { return text_.size() - docs_.size(); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  const std::string& document(std::size_t doc_id) const {
    if (doc_id >= docs_.size())
      throw InvalidArgument("unknown doc_id " + std::to_string(doc_id));
    return docs_[doc_id];
  }

  std::size_t document_words(std::size_t doc_id) const {
    document(doc_id);
    return doc_start_[doc_id + 1] - doc_start_[doc_id] - 1;
  }

  std::optional<MatchResult> longest_match(std::string_view text) const {
    return longest_match(tokenize(text));
  }

  std::optional<MatchResult> longest_match(const WordSeq& query) const {
    const auto q = interner_.find_all(query.words);
    const std::size_t m = params_.min_match_words;
    std::size_t best_len = 0;
    std::size_t best_offset = 0;
    std::size_t best_start = 0;
    for (std::size_t i = 0; i + m <= q.size(); ++i) {
      std::size_t lo = 0, hi = sa_.size(), depth = 0;
      while (i + depth < q.size() && q[i + depth] != kUnknownToken) {
        const TokenId c = q[i + depth];
        const auto key = [&](std::uint32_t s) -> std::int64_t {
          const std::size_t p = s + depth;
          return p < text_.size() ? static_cast<std::int64_t>(text_[p]) : -1;
        };
        auto first = sa_.begin() + static_cast<std::ptrdiff_t>(lo);
        auto last = sa_.begin() + static_cast<std::ptrdiff_t>(hi);
        auto a = std::lower_bound(first, last, c, [&](std::uint32_t s, TokenId v) {
          return key(s) < static_cast<std::int64_t>(v);
        });
        auto b = std::upper_bound(a, last, c, [&](TokenId v, std::uint32_t s) {
          return static_cast<std::int64_t>(v) < key(s);
        });
        if (a == b) break;
        lo = static_cast<std::size_t>(a - sa_.begin());
        hi = static_cast<std::size_t>(b - sa_.begin());
        ++depth;
      }
      if (depth < m || depth < best_len) continue;
      const std::size_t offset = range_min(lo, hi);
      if (depth > best_len || offset < best_offset) {
        best_len = depth;
        best_offset = offset;
        best_start = i;
      }
    }
    if (best_len == 0) return std::nullopt;
    const auto doc_it = std::upper_bound(doc_start_.begin(), doc_start_.end(), best_offset);
    const auto doc = static_cast<std::size_t>(doc_it - doc_start_.begin()) - 1;
    MatchResult r;
    r.doc_id = doc;
    r.doc_begin = best_offset - doc_start_[doc];
    r.doc_end = r.doc_begin + best_len;
    r.query_begin = best_start;
    r.query_end = best_start + best_len;
    r.matched_words = best_len;
    return r;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_u64(out, kVersion);
    write_u64(out, params_.min_match_words);
    write_u64(out, params_.saturation_words);
    write_u64(out, docs_.size());
    for (const auto& d : docs_) {
      write_u64(out, d.size());
      out.write(d.data(), static_cast<std::streamsize>(d.size()));
    }
    if (!out) throw IoError("short write on " + path.string());
  }

  static CorpusIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read index " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + sizeof magic, kMagic))
      throw IoError(path.string() + " is not an index file");
    const auto version = read_u64(in);
    if (version != kVersion)
      throw IoError("unsupported index version " + std::to_string(version));
    IndexParams params;
    params.min_match_words = read_u64(in);
    params.saturation_words = read_u64(in);
    const auto n = read_u64(in);
    Corpus corpus;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = read_u64(in);
      std::string doc(len, '\0');
      in.read(doc.data(), static_cast<std::streamsize>(len));
      if (!in) throw IoError("truncated index file " + path.string());
      corpus.docs.push_back(std::move(doc));
    }
    return build(corpus, params);
  }

 private:
  static void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }

  static std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("truncated index file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  void build_structures() {
    std::vector<std::vector<std::string>> words;
    words.reserve(docs_.size());
    for (const auto& d : docs_) words.push_back(tokenize(d).words);
    // Ids in lexicographic word order keep the index independent of
    // document order.
    std::vector<std::string> vocab;
    for (const auto& w : words) vocab.insert(vocab.end(), w.begin(), w.end());
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    for (const auto& w : vocab) interner_.intern(w);

    const auto sep_base = static_cast<TokenId>(vocab.size());
    doc_start_.clear();
    text_.clear();
    for (std::size_t d = 0; d < words.size(); ++d) {
      doc_start_.push_back(text_.size());
      for (const auto& w : words[d]) text_.push_back(interner_.find(w));
      text_.push_back(sep_base + static_cast<TokenId>(d));
      if (words[d].size() < params_.min_match_words)
        warnings_.push_back("document " + std::to_string(d) + " has " +
                            std::to_string(words[d].size()) +
                            " words, fewer than min_match_words; it can never match");
    }
    doc_start_.push_back(text_.size());
    build_suffix_array();
    build_range_min();
  }

  // Prefix doubling; stops as soon as all ranks are distinct.
  void build_suffix_array() {
    const std::size_t n = text_.size();
    sa_.resize(n);
    std::iota(sa_.begin(), sa_.end(), 0u);
    std::vector<std::int64_t> rank(text_.begin(), text_.end()), next(n);
    for (std::size_t k = 1;; k <<= 1) {
      const auto second = [&](std::uint32_t i) -> std::int64_t {
        return i + k < n ? rank[i + k] : -1;
      };
      const auto less = [&](std::uint32_t a, std::uint32_t b) {
        return rank[a] != rank[b] ? rank[a] < rank[b] : second(a) < second(b);
      };
      std::sort(sa_.begin(), sa_.end(), less);
      next[sa_[0]] = 0;
      for (std::size_t i = 1; i < n; ++i)
        next[sa_[i]] = next[sa_[i - 1]] + (less(sa_[i - 1], sa_[i]) ? 1 : 0);
      rank.swap(next);
      if (static_cast<std::size_t>(rank[sa_[n - 1]]) == n - 1 || k >= n) break;
    }
  }

  void build_range_min() {
    const std::size_t n = sa_.size();
    const std::size_t levels = std::bit_width(n);
    table_.assign(levels, {});
    table_[0].assign(sa_.begin(), sa_.end());
    for (std::size_t j = 1; j < levels; ++j) {
      const std::size_t span = std::size_t{1} << j;
      table_[j].resize(n - span + 1);
      for (std::size_t i = 0; i + span <= n; ++i)
        table_[j][i] = std::min(table_[j - 1][i], table_[j - 1][i + span / 2]);
    }
  }

  // Minimum suffix-array value over [lo, hi), hi > lo.
  std::size_t range_min(std::size_t lo, std::size_t hi) const {
    const std::size_t j = std::bit_width(hi - lo) - 1;
    return std::min(table_[j][lo], table_[j][hi - (std::size_t{1} << j)]);
  }

  IndexParams params_;
  std::vector<std::string> docs_;
  std::vector<std::string> warnings_;
  Interner interner_;
  std::vector<TokenId> text_;
  std::vector<std::size_t> doc_start_;
  std::vector<std::uint32_t> sa_;
  std::vector<std::vector<std::uint32_t>> table_;
};

}  // namespace leakforge
