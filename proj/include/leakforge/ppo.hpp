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

// Proximal policy optimization for prompt-emission episodes with a single
// terminal reward. Gradients are computed by hand (backpropagation through
// time over the recurrent policy) and can be checked against central finite
// differences with grad_check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "leakforge/attack_policy.hpp"
#include "leakforge/error.hpp"
#include "leakforge/rng.hpp"

namespace leakforge {

struct Trajectory {
  PromptSample sample;
  double terminal_reward = 0.0;
};

struct PPOConfig {
  double clip_eps = 0.2;
  double gamma = 1.0;
  double gae_lambda = 0.95;
  std::size_t epochs_per_batch = 4;
  std::size_t minibatch_size = 32;
  double learning_rate = 3e-3;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  std::size_t batch_episodes = 32;
  double max_grad_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool normalize_advantages = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(clip_eps > 0.0)) throw InvalidArgument("clip_eps must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
      throw InvalidArgument("gae_lambda must lie in [0, 1]");
    if (epochs_per_batch < 1) throw InvalidArgument("epochs_per_batch must be >= 1");
    if (minibatch_size < 1) throw InvalidArgument("minibatch_size must be >= 1");
    if (batch_episodes < 1) throw InvalidArgument("batch_episodes must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (!(entropy_coef >= 0.0) || !(value_coef >= 0.0))
      throw InvalidArgument("loss coefficients must be >= 0");
    if (!(max_grad_norm >= 0.0)) throw InvalidArgument("max_grad_norm must be >= 0 (0 disables)");
  }
};

struct TrainStats {
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Backward GAE recursion for an episode whose only reward arrives on the
/// last step; the state after the last step is terminal (value 0).
inline GaeResult compute_gae(std::span<const double> values, double terminal_reward,
                             double gamma, double gae_lambda) {
  if (values.empty()) throw InvalidArgument("trajectory is empty");
  const std::size_t n = values.size();
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double reward = i + 1 == n ? terminal_reward : 0.0;
    const double next_value = i + 1 == n ? 0.0 : values[i + 1];
    const double delta = reward + gamma * next_value - values[i];
    next_adv = delta + gamma * gae_lambda * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

/// A trajectory ready for the loss: frozen behaviour log-probabilities
/// (of the optimization distribution), advantages and value targets.
struct PreparedTrajectory {
  std::vector<TokenId> tokens;
  std::vector<double> old_logprobs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct PreparedBatch {
  std::vector<TokenId> prefix;
  std::size_t min_length = 1;
  std::vector<PreparedTrajectory> items;
  double mean_reward = 0.0;
};

inline PreparedBatch prepare_batch(const Policy& policy, std::span<const Trajectory> batch,
                                   const PPOConfig& config, const GenerationConfig& gen) {
  if (batch.empty()) throw InvalidArgument("PPO batch is empty");
  PreparedBatch out;
  out.prefix = conditioning_prefix(policy.vocab(), gen);
  out.min_length = gen.min_length;
  std::vector<double*> adv;
  for (const auto& traj : batch) {
    if (traj.sample.tokens.empty()) throw InvalidArgument("trajectory is empty");
    auto scores = logprob_and_value(policy, out.prefix, traj.sample.tokens, gen.min_length);
    auto gae = compute_gae(scores.values, traj.terminal_reward, config.gamma, config.gae_lambda);
    out.items.push_back({traj.sample.tokens, std::move(scores.logprobs),
                         std::move(gae.advantages), std::move(gae.returns)});
    out.mean_reward += traj.terminal_reward;
  }
  out.mean_reward /= static_cast<double>(batch.size());
  if (config.normalize_advantages) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& it : out.items) {
      for (double a : it.advantages) sum += a, ++n;
    }
    const double mean = sum / static_cast<double>(n);
    for (const auto& it : out.items) {
      for (double a : it.advantages) sq += (a - mean) * (a - mean);
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    // Degenerate spread: center only, so constant advantages vanish.
    const double scale = sd < 1e-8 ? 1.0 : 1.0 / sd;
    for (auto& it : out.items) {
      for (double& a : it.advantages) a = (a - mean) * scale;
    }
  }
  return out;
}

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double kl = 0.0;
  std::size_t clipped = 0;
  std::size_t tokens = 0;
};

/// Token-mean PPO loss over `which` items of the batch:
///   -min(rho A, clip(rho) A) + value_coef (V - R)^2 - entropy_coef H.
/// Adds d(loss)/d(theta) into `grad` when it is not null.
inline LossTerms ppo_loss(const Policy& policy, const PreparedBatch& batch,
                          std::span<const std::size_t> which, const PPOConfig& config,
                          Eigen::VectorXd* grad) {
  using Eigen::VectorXd;
  const auto& shape = policy.shape();
  const auto& theta = policy.theta();
  const auto& vocab = policy.vocab();
  const auto emb = Policy::embedding(theta, shape);
  const auto w_in = Policy::w_in(theta, shape);
  const auto w_rec = Policy::w_rec(theta, shape);
  const auto w_out = Policy::w_out(theta, shape);
  const auto w_v = Policy::w_value(theta, shape);
  const auto V = static_cast<Eigen::Index>(shape.vocab);
  const auto dh_n = static_cast<Eigen::Index>(shape.d_h);

  LossTerms terms;
  for (std::size_t k : which) terms.tokens += batch.items.at(k).tokens.size();
  if (terms.tokens == 0) return terms;
  const double w = 1.0 / static_cast<double>(terms.tokens);

  std::vector<TokenId> inputs;
  Eigen::MatrixXd hs;
  Eigen::MatrixXd dhs;
  for (std::size_t k : which) {
    const auto& it = batch.items[k];
    const std::size_t T = it.tokens.size();
    inputs.assign(batch.prefix.begin(), batch.prefix.end());
    inputs.insert(inputs.end(), it.tokens.begin(), it.tokens.end() - 1);
    const auto n_in = static_cast<Eigen::Index>(inputs.size());
    hs.resize(dh_n, n_in);
    VectorXd h = VectorXd::Zero(dh_n);
    for (Eigen::Index t = 0; t < n_in; ++t) {
      h = (w_in * emb.row(inputs[t]).transpose() + w_rec * h + Policy::b_h(theta, shape))
              .array().tanh().matrix();
      hs.col(t) = h;
    }
    if (grad) dhs = Eigen::MatrixXd::Zero(dh_n, n_in);

    const auto first = static_cast<Eigen::Index>(batch.prefix.size()) - 1;
    for (std::size_t j = 0; j < T; ++j) {
      const Eigen::Index pos = first + static_cast<Eigen::Index>(j);
      const auto hcol = hs.col(pos);
      VectorXd z = w_out.transpose() * hcol + Policy::b_out(theta, shape);
      const std::size_t step = j + 1;
      double top = -std::numeric_limits<double>::infinity();
      for (TokenId t = 0; t < V; ++t)
        if (token_allowed(vocab, t, step, batch.min_length)) top = std::max(top, z(t));
      VectorXd p = VectorXd::Zero(V);
      double sum = 0.0;
      for (TokenId t = 0; t < V; ++t)
        if (token_allowed(vocab, t, step, batch.min_length)) sum += (p(t) = std::exp(z(t) - top));
      p /= sum;
      const double log_sum = std::log(sum);
      double entropy = 0.0;
      for (TokenId t = 0; t < V; ++t)
        if (p(t) > 0.0) entropy -= p(t) * (z(t) - top - log_sum);

      const TokenId a = it.tokens[j];
      const double logp = z(a) - top - log_sum;
      const double ratio = std::exp(logp - it.old_logprobs[j]);
      const double adv = it.advantages[j];
      const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
      const double unclipped_obj = ratio * adv;
      const double clipped_obj = clipped_ratio * adv;
      const bool use_unclipped = unclipped_obj <= clipped_obj;
      const double value = w_v.col(0).dot(hcol) + Policy::b_value(theta, shape)(0, 0);
      const double verr = value - it.returns[j];

      terms.policy -= w * std::min(unclipped_obj, clipped_obj);
      terms.value += w * verr * verr;
      terms.entropy += w * entropy;
      terms.kl += w * ((ratio - 1.0) - (logp - it.old_logprobs[j]));
      if (std::abs(ratio - 1.0) > config.clip_eps) ++terms.clipped;

      if (!grad) continue;
      // d loss / d z: surrogate, then entropy.
      VectorXd dz = VectorXd::Zero(V);
      if (use_unclipped) {
        const double dlogp = -w * ratio * adv;
        dz -= dlogp * p;
        dz(a) += dlogp;
      }
      for (TokenId t = 0; t < V; ++t) {
        if (p(t) > 0.0)
          dz(t) += config.entropy_coef * w * p(t) * ((z(t) - top - log_sum) + entropy);
      }
      const double dvalue = 2.0 * config.value_coef * w * verr;
      Policy::w_out(*grad, shape).noalias() += hcol * dz.transpose();
      Policy::b_out(*grad, shape) += dz;
      Policy::w_value(*grad, shape) += dvalue * hcol;
      Policy::b_value(*grad, shape)(0, 0) += dvalue;
      dhs.col(pos) += w_out * dz + dvalue * w_v.col(0);
    }
    if (!grad) continue;
    VectorXd carry = VectorXd::Zero(dh_n);
    for (Eigen::Index t = n_in; t-- > 0;) {
      const VectorXd dh = dhs.col(t) + carry;
      const VectorXd da = dh.array() * (1.0 - hs.col(t).array().square());
      const VectorXd e = emb.row(inputs[t]).transpose();
      Policy::w_in(*grad, shape).noalias() += da * e.transpose();
      Policy::embedding(*grad, shape).row(inputs[t]) += (w_in.transpose() * da).transpose();
      if (t > 0) Policy::w_rec(*grad, shape).noalias() += da * hs.col(t - 1).transpose();
      Policy::b_h(*grad, shape) += da;
      carry = w_rec.transpose() * da;
    }
  }
  terms.total = terms.policy + config.value_coef * terms.value - config.entropy_coef * terms.entropy;
  return terms;
}

inline double grad_check(const Policy& policy, const PreparedBatch& batch, const PPOConfig& config,
                         double epsilon = 1e-5) {
  std::vector<std::size_t> all(batch.items.size());
  std::iota(all.begin(), all.end(), 0);
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(policy.theta().size());
  ppo_loss(policy, batch, all, config, &analytic);
  Policy probe = policy;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double keep = probe.theta()(i);
    probe.theta()(i) = keep + epsilon;
    const double up = ppo_loss(probe, batch, all, config, nullptr).total;
    probe.theta()(i) = keep - epsilon;
    const double down = ppo_loss(probe, batch, all, config, nullptr).total;
    probe.theta()(i) = keep;
    const double fd = (up - down) / (2.0 * epsilon);
    const double rel = std::abs(analytic(i) - fd) / std::max(1e-8, std::abs(analytic(i)) + std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

inline double grad_check(const Policy& policy, std::span<const Trajectory> batch,
                         const PPOConfig& config, const GenerationConfig& gen,
                         double epsilon = 1e-5) {
  return grad_check(policy, prepare_batch(policy, batch, config, gen), config, epsilon);
}

/// Runs PPO updates and owns the optimizer state.
class PPOTrainer {
 public:
  PPOTrainer(PPOConfig config, GenerationConfig gen)
      : config_(std::move(config)), gen_(std::move(gen)), rng_(derive_seed(config_.seed, 0x9907)) {
    config_.validate();
    gen_.validate();
  }

  const PPOConfig& config() const noexcept { return config_; }
  std::size_t optimizer_steps() const noexcept { return step_; }

  /// Updates `policy` in place. On NonFiniteLoss neither the policy nor the
  /// optimizer state is modified.
  TrainStats update(Policy& policy, std::span<const Trajectory> batch) {
    const auto prepared = prepare_batch(policy, batch, config_, gen_);
    Policy work = policy;
    Eigen::VectorXd m = m_, v = v_;
    if (m.size() != work.theta().size()) {
      m = Eigen::VectorXd::Zero(work.theta().size());
      v = Eigen::VectorXd::Zero(work.theta().size());
    }
    std::size_t step = step_;
    Rng rng = rng_;

    TrainStats stats;
    stats.mean_reward = prepared.mean_reward;
    std::size_t tokens = 0, clipped = 0;
    std::vector<std::size_t> order(prepared.items.size());
    std::iota(order.begin(), order.end(), 0);
    Eigen::VectorXd grad(work.theta().size());
    for (std::size_t epoch = 0; epoch < config_.epochs_per_batch; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t begin = 0; begin < order.size(); begin += config_.minibatch_size) {
        const std::size_t end = std::min(order.size(), begin + config_.minibatch_size);
        grad.setZero();
        const auto terms = ppo_loss(work, prepared, std::span(order).subspan(begin, end - begin),
                                    config_, &grad);
        if (!std::isfinite(terms.policy)) throw NonFiniteLoss("policy_loss", terms.policy);
        if (!std::isfinite(terms.value)) throw NonFiniteLoss("value_loss", terms.value);
        if (!std::isfinite(terms.entropy)) throw NonFiniteLoss("entropy", terms.entropy);
        if (!grad.allFinite()) throw NonFiniteLoss("gradient", grad.norm());
        const double nt = static_cast<double>(terms.tokens);
        stats.policy_loss += terms.policy * nt;
        stats.value_loss += terms.value * nt;
        stats.entropy += terms.entropy * nt;
        stats.approx_kl += terms.kl * nt;
        tokens += terms.tokens;
        clipped += terms.clipped;

        if (config_.max_grad_norm > 0.0) {
          const double norm = grad.norm();
          if (norm > config_.max_grad_norm) grad *= config_.max_grad_norm / norm;
        }
        ++step;
        m = config_.adam_beta1 * m + (1.0 - config_.adam_beta1) * grad;
        v = config_.adam_beta2 * v + (1.0 - config_.adam_beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(step));
        work.theta().array() -= config_.learning_rate * (m.array() / c1) /
                                ((v.array() / c2).sqrt() + config_.adam_eps);
      }
    }
    if (!work.finite()) throw NonFiniteLoss("parameters", std::numeric_limits<double>::quiet_NaN());
    const double nt = static_cast<double>(std::max<std::size_t>(tokens, 1));
    stats.policy_loss /= nt;
    stats.value_loss /= nt;
    stats.entropy /= nt;
    stats.approx_kl /= nt;
    stats.clip_fraction = static_cast<double>(clipped) / nt;

    policy = std::move(work);
    m_ = std::move(m);
    v_ = std::move(v);
    step_ = step;
    rng_ = rng;
    return stats;
  }

 private:
  PPOConfig config_;
  GenerationConfig gen_;
  Rng rng_;
  Eigen::VectorXd m_, v_;
  std::size_t step_ = 0;
};

}  // namespace leakforge
