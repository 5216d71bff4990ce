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


// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).
//
//   acceptance [--only 1,2,...]

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "leakforge/campaign.hpp"
#include "leakforge/ppo.hpp"
#include "leakforge/text_metrics.hpp"
#include "naive_span_oracle.hpp"

using namespace leakforge;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Wraps a target and counts every invocation.
class CountingTarget final : public Target {
 public:
  explicit CountingTarget(std::shared_ptr<const Target> inner) : inner_(std::move(inner)) {}
  ChatResponse generate(const ChatRequest& r) const override {
    ++calls;
    return inner_->generate(r);
  }
  std::size_t parallelism() const noexcept override { return inner_->parallelism(); }
  mutable std::atomic<std::size_t> calls = 0;

 private:
  std::shared_ptr<const Target> inner_;
};

// Query accounting of every campaign run by this binary.
struct BudgetRecord {
  std::string name;
  std::size_t budget = 0;
  std::size_t max_logged = 0;     // highest query_count_so_far in the log
  std::size_t training_calls = 0; // target invocations during training
  std::size_t logged_training = 0;
};
std::vector<BudgetRecord> g_budget_records;

struct CampaignRun {
  CampaignEnvironment env;
  CampaignResult result;
  std::string log;
  double seconds = 0.0;
};

CampaignRun run_campaign(const CampaignConfig& config, const std::string& name) {
  const auto t0 = Clock::now();
  auto base = make_environment(config);
  auto counting = std::make_shared<CountingTarget>(base.target);
  auto env = base;
  env.target = counting;
  std::ostringstream log;
  CampaignRun run{std::move(base), Campaign(config, env, &log).run(), log.str(), seconds_since(t0)};

  BudgetRecord rec{name, config.query_budget};
  std::istringstream in(run.log);
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"type\":\"episode\"") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    rec.max_logged = std::max(rec.max_logged, j["query_count_so_far"].get<std::size_t>());
  }
  const std::size_t eval_calls = run.result.eval ? run.result.eval->queries : 0;
  rec.training_calls = counting->calls.load() - eval_calls;
  rec.logged_training = run.result.training_queries;
  g_budget_records.push_back(rec);
  return run;
}

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence.

std::size_t reference_wed(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return dp[a.size()][b.size()];
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f", "g", "h"};
  auto random_seq = [&] {
    const std::size_t n = rng.below(31);
    const std::size_t k = 2 + rng.below(alphabet.size() - 1);
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += (i ? " " : "") + alphabet[rng.below(k)];
    return tokenize(text);
  };
  const int pairs = 2000;
  int mismatches = 0;
  for (int i = 0; i < pairs; ++i) {
    const auto a = random_seq();
    const auto b = random_seq();
    const auto want = reference_wed(a.words, b.words);
    if (word_edit_distance(a, b) != want) ++mismatches;
    if (!b.empty() && b.size() <= BitPattern::kMaxLength) {
      Interner in;
      const auto bi = in.intern_all(b.words);
      const auto ai = in.intern_all(a.words);
      if (BitPattern(bi).distance(ai) != want) ++mismatches;
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s <= 5.0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) +
                                           " mismatches, " + fmt("%.3f", s) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------------------
// 2. Normalization anchor.

Verdict criterion2() {
  const MetricParams p;  // k = 5, x0 = 0.6
  const double anchor = swes_norm(0.6, p);
  bool monotone = true;
  double prev = -1.0;
  for (int i = 0; i < 1000; ++i) {
    const double y = swes_norm(4.0 * i / 999.0, p);
    if (!(y > prev)) monotone = false;
    prev = y;
  }
  const bool ok = std::abs(anchor - 0.5) <= 1e-9 && monotone;
  return {ok, "swes_norm(0.6) = " + fmt("%.12f", anchor) + ", strictly increasing on 1000 points of [0, 4]: " +
                  (monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 3. Containment property.

Verdict criterion3() {
  Rng rng(303);
  const auto words = synthetic::common_vocabulary(40);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::string> d(1 + rng.below(60));
    for (auto& w : d) w = words[rng.below(words.size())];
    std::vector<std::string> u = d;
    const auto extra = rng.below(2);  // 0 or 1 filler word
    if (extra) {
      const auto filler = synthetic::pseudo_word(rng.below(100000));
      u.insert(u.begin() + static_cast<std::ptrdiff_t>(rng.below(2) ? u.size() : 0), filler);
    }
    const auto r = reward(tokenize(join_words(u)), tokenize(join_words(d)));
    worst = std::max(worst, std::abs(r.total - 1.0));
  }
  return {worst <= 1e-9, "200 constructions, max |total - 1| = " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------
// 4. Index correctness and latency.

Verdict criterion4() {
  synthetic::CorpusParams cp;
  cp.documents = 4500;
  cp.seed = 404;
  const auto corpus = synthetic::corpus(cp);
  std::size_t bytes = 0;
  for (const auto& d : corpus.docs) bytes += d.size() + 1;
  const auto index = CorpusIndex::build(corpus);
  testing::NaiveSpanOracle oracle(corpus.docs, index.params().min_match_words);

  Rng rng(4040);
  const auto common = synthetic::common_vocabulary(cp.common_vocabulary);
  auto filler = [&](std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(rng.below(2) ? common[rng.below(common.size())] : synthetic::pseudo_word(rng.below(50000)));
    return out;
  };
  int disagreements = 0;
  int matched = 0;
  std::vector<double> latency_ms;
  for (int q = 0; q < 100; ++q) {
    std::vector<std::string> query = filler(rng.below(10));
    const int spans = q % 4 == 3 ? 0 : 1 + static_cast<int>(rng.below(2));
    for (int s = 0; s < spans; ++s) {
      const auto words = tokenize(corpus.docs[rng.below(corpus.docs.size())]).words;
      const std::size_t len = std::min<std::size_t>(words.size(), 4 + rng.below(40));
      const std::size_t start = rng.below(words.size() - len + 1);
      query.insert(query.end(), words.begin() + static_cast<std::ptrdiff_t>(start),
                   words.begin() + static_cast<std::ptrdiff_t>(start + len));
      const auto tail = filler(rng.below(6));
      query.insert(query.end(), tail.begin(), tail.end());
    }
    const auto text = join_words(query);
    const auto t0 = Clock::now();
    const auto got = index.longest_match(text);
    latency_ms.push_back(seconds_since(t0) * 1e3);
    const auto want = oracle.longest_match(text);
    if (got != want) ++disagreements;
    if (got) ++matched;
  }
  const double med = median(latency_ms);
  const bool ok = bytes >= (1u << 20) && disagreements == 0 && med <= 10.0;
  return {ok, fmt("%.2f", bytes / 1048576.0) + " MB corpus, 100 queries (" + std::to_string(matched) +
                  " with a match), " + std::to_string(disagreements) + " disagreements, median latency " +
                  fmt("%.4f", med) + " ms (limit 10 ms)"};
}

// ---------------------------------------------------------------------------
// 5. PPO gradient fidelity and bandit convergence.

Verdict criterion5() {
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Vocab vocab = Vocab::with_words({"w1", "w2", "w3", "w4", "w5", "w6"});
    auto policy = Policy::init(vocab, 6, 12, seed);
    params = std::max<std::size_t>(params, static_cast<std::size_t>(policy.theta().size()));
    GenerationConfig gen;
    gen.min_length = 2;
    gen.max_length = 6;
    gen.top_k = vocab.size();
    Rng rng(seed * 77);
    std::vector<Trajectory> batch;
    for (int e = 0; e < 6; ++e) {
      auto s = sample_prompt(policy, gen, rng);
      batch.push_back({std::move(s), rng.uniform()});
    }
    PPOConfig config;
    auto prepared = prepare_batch(policy, batch, config, gen);
    // Push some ratios outside the clip range so both branches are exercised.
    for (auto& it : prepared.items)
      for (double& lp : it.old_logprobs) lp += (static_cast<double>(rng.below(3)) - 1.0) * 0.5;
    worst = std::max(worst, grad_check(policy, prepared, config, 1e-5));
  }

  const Vocab vocab({"<bos>", "<eos>", "a", "b", "c"});
  GenerationConfig gen;
  gen.min_length = gen.max_length = 1;
  gen.t_high = gen.t_base = 1.0;
  gen.top_k = vocab.size();
  PPOConfig config;
  config.batch_episodes = 16;
  config.minibatch_size = 16;
  config.learning_rate = 0.01;
  auto policy = Policy::init(vocab, 4, 8, 21);
  PPOTrainer trainer(config, gen);
  Rng rng(9);
  const TokenId good = vocab.id("b");
  auto prob_good = [&] {
    const auto s = logprob_and_value(policy, std::vector<TokenId>{vocab.bos()}, std::vector<TokenId>{good}, 1);
    return std::exp(s.logprobs[0]);
  };
  int reached = -1;
  for (int u = 0; u < 200 && reached < 0; ++u) {
    std::vector<Trajectory> batch;
    for (std::size_t e = 0; e < config.batch_episodes; ++e) {
      auto s = sample_prompt(policy, gen, rng);
      const double r = s.tokens[0] == good ? 1.0 : 0.0;
      batch.push_back({std::move(s), r});
    }
    trainer.update(policy, batch);
    if (prob_good() >= 0.9) reached = u + 1;
  }
  const bool ok = worst <= 1e-4 && params <= 5000 && reached > 0;
  return {ok, "grad_check max relative error " + fmt("%.3g", worst) + " over 3 seeds (" + std::to_string(params) +
                  " params); bandit P(rewarded arm) >= 0.9 after " +
                  (reached > 0 ? std::to_string(reached) : std::string("never (200)")) + " updates"};
}

// ---------------------------------------------------------------------------
// 6 and 8. System-prompt extraction runs.

struct SysRun {
  double trained_wes = 0.0;
  double untrained_wes = 0.0;
  std::size_t distinct = 0;
  double seconds = 0.0;
};

std::map<std::pair<std::uint64_t, bool>, SysRun> g_sys_runs;

const SysRun& sysprompt_run(std::uint64_t seed, bool no_diversity) {
  const auto key = std::make_pair(seed, no_diversity);
  if (auto it = g_sys_runs.find(key); it != g_sys_runs.end()) return it->second;
  auto config = CampaignConfig::defaults(Mode::kSysprompt);
  config.seed = seed;
  config.ablation.no_diversity = no_diversity;
  const auto t0 = Clock::now();
  auto run = run_campaign(config, std::string(no_diversity ? "no-diversity" : "full") + " seed " +
                                      std::to_string(seed));
  SysRun out;
  out.trained_wes = run.result.eval ? run.result.eval->mean_wes : 0.0;
  // Untrained baseline: five prompts from the random-init policy, same protocol.
  QueryBudget budget(config.eval.eval_query_budget);
  out.untrained_wes = evaluate_top5(untrained_prompts(config, run.env, config.eval.top_prompts),
                                    run.env.test_prompts, *run.env.target, config.target, config.metric,
                                    config.eval.repeats, derive_seed(config.seed, 5), budget)
                          .mean_wes;
  out.seconds = seconds_since(t0);
  out.distinct = run.result.archive.distinct_count(0.8);
  std::cerr << "  sysprompt " << (no_diversity ? "no-diversity" : "full") << " seed " << seed << ": trained WES "
            << out.trained_wes << ", untrained WES " << out.untrained_wes << ", archive " << run.result.archive.size()
            << " (" << out.distinct << " distinct), " << out.seconds << " s\n";
  return g_sys_runs.emplace(key, out).first->second;
}

Verdict criterion6() {
  int passed = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto& r = sysprompt_run(seed, false);
    const bool ok = r.trained_wes >= 0.7 && r.untrained_wes <= 0.2 && r.seconds <= 600.0;
    passed += ok;
    detail += (seed ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " + fmt("%.3f", r.trained_wes) +
              " vs " + fmt("%.3f", r.untrained_wes) + " in " + fmt("%.0f", r.seconds) + " s" + (ok ? "" : " (fail)");
  }
  const auto budget = CampaignConfig::defaults(Mode::kSysprompt).query_budget;
  return {passed >= 4, std::to_string(passed) + "/5 seeds pass (need 4; trained >= 0.7, untrained <= 0.2, <= 600 s, " +
                           std::to_string(budget) + " training queries): " + detail};
}

Verdict criterion8() {
  std::vector<double> wes_full, wes_nodiv, distinct_full, distinct_nodiv;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto& f = sysprompt_run(seed, false);
    const auto& n = sysprompt_run(seed, true);
    wes_full.push_back(f.trained_wes);
    wes_nodiv.push_back(n.trained_wes);
    distinct_full.push_back(static_cast<double>(f.distinct));
    distinct_nodiv.push_back(static_cast<double>(n.distinct));
  }
  const bool wes_ok = median(wes_full) >= median(wes_nodiv);
  const bool div_ok = median(distinct_nodiv) < median(distinct_full);
  return {wes_ok && div_ok, "median final WES full " + fmt("%.3f", median(wes_full)) + " vs no-diversity " +
                                fmt("%.3f", median(wes_nodiv)) + (wes_ok ? " (ok)" : " (fail)") +
                                "; median distinct prompts full " + fmt("%.0f", median(distinct_full)) +
                                " vs no-diversity " + fmt("%.0f", median(distinct_nodiv)) +
                                (div_ok ? " (ok)" : " (fail: no-diversity is not strictly lower)")};
}

// ---------------------------------------------------------------------------
// 7. Two-stage training-data extraction.

Verdict criterion7() {
  auto config = CampaignConfig::defaults(Mode::kTrainingData);
  auto run = run_campaign(config, "training-data seed 0");
  const auto& r = run.result;
  std::vector<double> stage2;
  for (std::size_t i = 0; i < r.stages.size(); ++i)
    if (r.stages[i] == 2) stage2.push_back(r.base_rewards[i]);
  const std::size_t w = 50;
  const bool reached = r.stage2_episode.has_value() && stage2.size() >= 2 * w;
  const auto sm = smoothed(stage2, w);
  const double start = reached ? sm[w - 1] : 0.0;
  const double end = reached ? sm.back() : 0.0;
  const double fixed = fixed_prompt_asr(config, run.env, std::max<std::size_t>(r.stage1_queries, 1));
  const bool asr_ok = r.stage1_asr() > 0.0 && r.stage1_asr() >= 5.0 * fixed;
  const bool ok = reached && start < 0.2 && end >= 0.5 && asr_ok;
  std::cerr << "  training-data: " << run.seconds << " s, selected doc "
            << (r.selected_doc ? std::to_string(*r.selected_doc) : "none") << ", campaign ASR " << r.asr() << "\n";
  return {ok, std::string("stage 2 ") + (reached ? "reached at episode " + std::to_string(*r.stage2_episode) : "not reached") +
                  "; smoothed (w=50) stage-2 reward " + fmt("%.3f", start) + " -> " + fmt("%.3f", end) +
                  " (need < 0.2 -> >= 0.5); stage-1 ASR " + fmt("%.4f", r.stage1_asr()) + " over " +
                  std::to_string(r.stage1_queries) + " queries vs fixed prompt " + fmt("%.4f", fixed) + " (need >= 5x)"};
}

// ---------------------------------------------------------------------------
// 9. Determinism and budget.

Verdict criterion9() {
  bool identical = true;
  for (auto mode : {Mode::kSysprompt, Mode::kTrainingData}) {
    auto config = CampaignConfig::defaults(mode);
    config.query_budget = 1000;  // not a batch multiple: exercises the partial batch
    config.target.sim.parallelism = 4;
    config.seed = 99;
    const auto a = run_campaign(config, std::string(to_string(mode)) + " replay a");
    const auto b = run_campaign(config, std::string(to_string(mode)) + " replay b");
    identical = identical && a.log == b.log && !a.log.empty();
  }
  bool within = true;
  for (const auto& rec : g_budget_records) {
    if (rec.max_logged > rec.budget || rec.training_calls > rec.budget || rec.training_calls != rec.logged_training)
      within = false;
  }
  return {identical && within, std::string("same-seed logs byte-identical: ") + (identical ? "yes" : "no") + "; " +
                                   std::to_string(g_budget_records.size()) +
                                   " campaigns checked, recorded queries within budget and equal to target calls: " +
                                   (within ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    }
  }
  struct Criterion {
    int id;
    const char* name;
    Verdict (*fn)();
  };
  const Criterion criteria[] = {
      {1, "metric oracle equivalence", criterion1},
      {2, "normalization anchor", criterion2},
      {3, "containment property", criterion3},
      {4, "index correctness", criterion4},
      {5, "PPO gradient fidelity", criterion5},
      {6, "end-to-end system-prompt extraction", criterion6},
      {7, "two-stage training-data extraction", criterion7},
      {8, "ablation directionality", criterion8},
      {9, "determinism and budget", criterion9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << v.detail
              << std::endl;
  }
  return failed;
}
