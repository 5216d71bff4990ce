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

// Attack agent: a small recurrent categorical model over a compact prompt
// vocabulary with a value head. Sampling applies the exploration schedule
// (high temperature on the first tokens, then base temperature, plus top-k);
// logprob_and_value scores the untempered distribution used by PPO.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "leakforge/error.hpp"
#include "leakforge/rng.hpp"
#include "leakforge/text_metrics.hpp"

namespace leakforge {

class Vocab {
 public:
  static constexpr const char* kBos = "<bos>";
  static constexpr const char* kEos = "<eos>";

  /// Specials first (BOS, EOS, "[eos]", "{", "%"), then `words` in order,
  /// skipping duplicates.
  static Vocab with_words(const std::vector<std::string>& words) {
    std::vector<std::string> tokens = {kBos, kEos, "[eos]", "{", "%"};
    for (const auto& w : words) {
      if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) tokens.push_back(w);
    }
    return Vocab(std::move(tokens));
  }

  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw InvalidArgument("vocabulary contains an empty token");
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw InvalidArgument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    bos_ = id(kBos);
    eos_ = id(kEos);
  }

  static Vocab load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) tokens.push_back(line);
    }
    try {
      return Vocab(std::move(tokens));
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    for (const auto& t : tokens_) out << t << '\n';
    if (!out) throw IoError("cannot write vocabulary " + path.string());
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  TokenId bos() const noexcept { return bos_; }
  TokenId eos() const noexcept { return eos_; }
  bool contains(const std::string& t) const { return index_.count(t) != 0; }

  TokenId id(const std::string& t) const {
    auto it = index_.find(t);
    if (it == index_.end()) throw InvalidArgument("token '" + t + "' is not in the vocabulary");
    return it->second;
  }

  /// Prompt text for a token sequence; BOS and EOS are not rendered.
  std::string render(std::span<const TokenId> ids) const {
    std::vector<std::string> words;
    for (TokenId t : ids) {
      if (t != bos_ && t != eos_) words.push_back(token(t));
    }
    return join_words(words);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId bos_ = 0;
  TokenId eos_ = 0;
};

struct PolicyShape {
  std::size_t vocab = 0;
  std::size_t d_e = 0;
  std::size_t d_h = 0;

  std::size_t parameter_count() const {
    return vocab * d_e + d_h * d_e + d_h * d_h + d_h + d_h * vocab + vocab + d_h + 1;
  }
  bool operator==(const PolicyShape&) const = default;
};

/// Elman recurrent network, all weights in one flat vector:
///   h_t   = tanh(W_in E[x_t] + W_rec h_{t-1} + b_h)
///   logit = W_out^T h_t + b_out,   value = w_v . h_t + b_v
class Policy {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  static Policy init(const Vocab& vocab, std::size_t d_e, std::size_t d_h, std::uint64_t seed) {
    if (d_e < 1 || d_h < 1) throw InvalidArgument("policy dimensions must be >= 1");
    Policy p(std::make_shared<const Vocab>(vocab), {vocab.size(), d_e, d_h});
    Rng rng(seed);
    auto fill = [&](auto block, double fan_in) {
      const double scale = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index j = 0; j < block.cols(); ++j)
        for (Eigen::Index i = 0; i < block.rows(); ++i)
          block(i, j) = (2.0 * rng.uniform() - 1.0) * scale;
    };
    // The embedding is a lookup table: fan-in of one row.
    fill(p.embedding(), 1.0);
    fill(p.w_in(), static_cast<double>(d_e));
    fill(p.w_rec(), static_cast<double>(d_h));
    fill(p.w_out(), static_cast<double>(d_h));
    fill(p.w_value(), static_cast<double>(d_h));
    return p;
  }

  Policy(std::shared_ptr<const Vocab> vocab, PolicyShape shape)
      : vocab_(std::move(vocab)), shape_(shape),
        theta_(Vector::Zero(static_cast<Eigen::Index>(shape.parameter_count()))) {
    if (vocab_->size() != shape_.vocab) throw InvalidArgument("policy shape does not match vocabulary");
  }

  const Vocab& vocab() const noexcept { return *vocab_; }
  const PolicyShape& shape() const noexcept { return shape_; }
  Vector& theta() noexcept { return theta_; }
  const Vector& theta() const noexcept { return theta_; }

 private:
  template <class V>
  static auto block(V& t, const PolicyShape& s, int which, std::size_t rows, std::size_t cols) {
    const std::size_t sizes[] = {s.vocab * s.d_e, s.d_h * s.d_e, s.d_h * s.d_h, s.d_h,
                                 s.d_h * s.vocab, s.vocab, s.d_h, 1};
    std::size_t off = 0;
    for (int i = 0; i < which; ++i) off += sizes[i];
    using Scalar = std::remove_reference_t<decltype(*t.data())>;
    using M = std::conditional_t<std::is_const_v<Scalar>, const Matrix, Matrix>;
    return Eigen::Map<M>(t.data() + off, static_cast<Eigen::Index>(rows),
                         static_cast<Eigen::Index>(cols));
  }

 public:
  // Parameter block views. `theta` may be any vector laid out like theta().
  template <class V> static auto embedding(V& t, const PolicyShape& s) { return block(t, s, 0, s.vocab, s.d_e); }
  template <class V> static auto w_in(V& t, const PolicyShape& s) { return block(t, s, 1, s.d_h, s.d_e); }
  template <class V> static auto w_rec(V& t, const PolicyShape& s) { return block(t, s, 2, s.d_h, s.d_h); }
  template <class V> static auto b_h(V& t, const PolicyShape& s) { return block(t, s, 3, s.d_h, 1); }
  template <class V> static auto w_out(V& t, const PolicyShape& s) { return block(t, s, 4, s.d_h, s.vocab); }
  template <class V> static auto b_out(V& t, const PolicyShape& s) { return block(t, s, 5, s.vocab, 1); }
  template <class V> static auto w_value(V& t, const PolicyShape& s) { return block(t, s, 6, s.d_h, 1); }
  template <class V> static auto b_value(V& t, const PolicyShape& s) { return block(t, s, 7, 1, 1); }

  MatrixMap embedding() { return embedding(theta_, shape_); }
  MatrixMap w_in() { return w_in(theta_, shape_); }
  MatrixMap w_rec() { return w_rec(theta_, shape_); }
  MatrixMap w_out() { return w_out(theta_, shape_); }
  MatrixMap w_value() { return w_value(theta_, shape_); }
  ConstMatrixMap w_out() const { return w_out(theta_, shape_); }

  /// One recurrent step: returns the state after consuming `token`.
  Vector step(const Vector& h, TokenId token) const {
    const auto e = embedding(theta_, shape_).row(token).transpose();
    return (w_in(theta_, shape_) * e + w_rec(theta_, shape_) * h + b_h(theta_, shape_)).array().tanh().matrix();
  }

  Vector initial_state() const { return Vector::Zero(static_cast<Eigen::Index>(shape_.d_h)); }

  Vector logits(const Vector& h) const {
    return w_out(theta_, shape_).transpose() * h + b_out(theta_, shape_);
  }

  double value(const Vector& h) const {
    return w_value(theta_, shape_).col(0).dot(h) + b_value(theta_, shape_)(0, 0);
  }

  bool finite() const { return theta_.allFinite(); }

  void save(const std::filesystem::path& path) const;
  static Policy load(const std::filesystem::path& path);

 private:
  std::shared_ptr<const Vocab> vocab_;
  PolicyShape shape_;
  Vector theta_;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw IoError("truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t limit = std::size_t{1} << 30) {
  const auto n = read_u64(in);
  if (n > limit) throw IoError("string length out of range");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("truncated file");
  return s;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace detail

inline constexpr char kPolicyMagic[8] = {'L', 'F', 'P', 'O', 'L', 'I', 'C', 'Y'};
inline constexpr std::uint64_t kPolicyVersion = 1;

inline void Policy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write policy " + path.string());
  out.write(kPolicyMagic, sizeof kPolicyMagic);
  detail::write_u64(out, kPolicyVersion);
  detail::write_u64(out, shape_.vocab);
  detail::write_u64(out, shape_.d_e);
  detail::write_u64(out, shape_.d_h);
  for (const auto& t : vocab_->tokens()) detail::write_string(out, t);
  for (Eigen::Index i = 0; i < theta_.size(); ++i) detail::write_f64(out, theta_(i));
  if (!out) throw IoError("cannot write policy " + path.string());
}

inline Policy Policy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open policy " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof magic) != 0)
    throw IoError(path.string() + " is not a policy checkpoint");
  if (detail::read_u64(in) != kPolicyVersion) throw IoError("unsupported policy version");
  PolicyShape shape;
  shape.vocab = detail::read_u64(in);
  shape.d_e = detail::read_u64(in);
  shape.d_h = detail::read_u64(in);
  if (shape.vocab > (1u << 24) || shape.d_e > 4096 || shape.d_h > 4096)
    throw IoError("policy shape out of range");
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < shape.vocab; ++i) tokens.push_back(detail::read_string(in, 1 << 20));
  Policy p(std::make_shared<const Vocab>(std::move(tokens)), shape);
  for (Eigen::Index i = 0; i < p.theta_.size(); ++i) p.theta_(i) = detail::read_f64(in);
  return p;
}

struct GenerationConfig {
  double t_high = 5.0;
  double t_base = 1.0;
  std::size_t k_boundary = 4;
  std::size_t top_k = 20;
  std::size_t min_length = 15;
  std::size_t max_length = 64;
  std::vector<std::string> initial_prompt;

  void validate() const {
    // Equal temperatures are allowed: that is the fixed-temperature ablation.
    if (!(t_base > 0.0)) throw InvalidArgument("t_base must be positive");
    if (!(t_high >= t_base)) throw InvalidArgument("t_high must be >= t_base");
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
    if (min_length < 1 || max_length > 256 || min_length > max_length)
      throw InvalidArgument("length_range must satisfy 1 <= min <= max <= 256");
  }

  double temperature(std::size_t step) const { return step <= k_boundary ? t_high : t_base; }
};

/// Conditioning prefix: BOS followed by the initial prompt tokens.
inline std::vector<TokenId> conditioning_prefix(const Vocab& vocab, const GenerationConfig& gen) {
  std::vector<TokenId> prefix = {vocab.bos()};
  for (const auto& t : gen.initial_prompt) prefix.push_back(vocab.id(t));
  return prefix;
}

/// Structural mask for step `step` (1-based): BOS is never emitted and EOS
/// only once at least `min_length` words exist.
inline bool token_allowed(const Vocab& vocab, TokenId t, std::size_t step, std::size_t min_length) {
  if (t == vocab.bos()) return false;
  if (t == vocab.eos()) return step > min_length;
  return true;
}

struct PromptSample {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;
  std::vector<double> values;
  /// Emitted words, not counting a terminating EOS.
  std::size_t length = 0;
};

/// Probabilities of the tempered top-k distribution, zero outside the kept set.
inline Eigen::VectorXd applied_distribution(const Eigen::VectorXd& logits, const Vocab& vocab,
                                            std::size_t step, std::size_t min_length,
                                            double temperature, std::size_t top_k) {
  std::vector<TokenId> ids;
  for (TokenId t = 0; t < logits.size(); ++t) {
    if (token_allowed(vocab, t, step, min_length)) ids.push_back(t);
  }
  const std::size_t k = std::min(top_k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) {
                      return logits(a) != logits(b) ? logits(a) > logits(b) : a < b;
                    });
  ids.resize(k);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  const double top = logits(ids[0]);
  double z = 0.0;
  for (TokenId t : ids) z += (p(t) = std::exp((logits(t) - top) / temperature));
  p /= z;
  return p;
}

inline PromptSample sample_prompt(const Policy& policy, const GenerationConfig& gen, Rng& rng) {
  const Vocab& vocab = policy.vocab();
  PromptSample s;
  const std::size_t target = rng.between(gen.min_length, gen.max_length);
  auto h = policy.initial_state();
  for (TokenId t : conditioning_prefix(vocab, gen)) h = policy.step(h, t);
  for (std::size_t step = 1; s.length < target; ++step) {
    const auto p = applied_distribution(policy.logits(h), vocab, step, gen.min_length,
                                        gen.temperature(step), gen.top_k);
    double x = rng.uniform();
    TokenId pick = 0;
    TokenId last_kept = 0;
    bool chosen = false;
    for (TokenId t = 0; t < p.size(); ++t) {
      if (p(t) <= 0.0) continue;
      last_kept = t;
      if (x < p(t)) {
        pick = t;
        chosen = true;
        break;
      }
      x -= p(t);
    }
    if (!chosen) pick = last_kept;
    s.tokens.push_back(pick);
    s.logprobs.push_back(std::log(p(pick)));
    s.values.push_back(policy.value(h));
    if (pick == vocab.eos()) break;
    ++s.length;
    h = policy.step(h, pick);
  }
  return s;
}

struct StepScores {
  std::vector<double> logprobs;
  std::vector<double> values;
};

/// Log-probabilities of `tokens` under the untempered, unfiltered softmax
/// (with the structural mask) and the value estimate at each step.
inline StepScores logprob_and_value(const Policy& policy, std::span<const TokenId> prefix,
                                    std::span<const TokenId> tokens, std::size_t min_length) {
  const Vocab& vocab = policy.vocab();
  StepScores out;
  if (tokens.empty()) return out;
  auto h = policy.initial_state();
  for (TokenId t : prefix) h = policy.step(h, t);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId a = tokens[i];
    if (a >= vocab.size()) throw InvalidArgument("unknown token id " + std::to_string(a));
    const auto z = policy.logits(h);
    const std::size_t step = i + 1;
    double top = -std::numeric_limits<double>::infinity();
    for (TokenId t = 0; t < z.size(); ++t)
      if (token_allowed(vocab, t, step, min_length)) top = std::max(top, z(t));
    double sum = 0.0;
    for (TokenId t = 0; t < z.size(); ++t)
      if (token_allowed(vocab, t, step, min_length)) sum += std::exp(z(t) - top);
    out.logprobs.push_back(token_allowed(vocab, a, step, min_length)
                               ? z(a) - top - std::log(sum)
                               : -std::numeric_limits<double>::infinity());
    out.values.push_back(policy.value(h));
    h = policy.step(h, a);
  }
  return out;
}

}  // namespace leakforge
