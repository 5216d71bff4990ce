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


// leakforge command-line driver.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "leakforge/campaign.hpp"
#include "leakforge/config.hpp"
#include "leakforge/leak_index.hpp"
#include "leakforge/text_metrics.hpp"

namespace fs = std::filesystem;
using namespace leakforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBudget = 2;
constexpr int kExitConfig = 3;

struct CampaignArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  bool wall_time = false;
};

void add_campaign_options(CLI::App* cmd, CampaignArgs& a) {
  cmd->add_option("-c,--config", a.config, "campaign config (YAML)")->required();
  cmd->add_option("-o,--out", a.out, "output directory (default runs/<mode>-<label>-seed<N>)");
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--budget", a.budget, "override query_budget");
  cmd->add_flag("--wall-time", a.wall_time, "record wall-clock times in the log");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_campaign(const CampaignArgs& a, Mode expected) {
  auto config = load_config(a.config);
  if (config.mode != expected) {
    throw ConfigError(std::string("config mode is '") + to_string(config.mode) + "', this command needs '" +
                      to_string(expected) + "'");
  }
  if (a.seed) config.seed = *a.seed;
  if (a.budget) config.query_budget = *a.budget;
  if (a.wall_time) config.log.record_wall_time = true;
  config.validate();

  const fs::path out = a.out.empty() ? fs::path("runs") / (std::string(to_string(config.mode)) + "-" +
                                                           config.ablation.label() + "-seed" +
                                                           std::to_string(config.seed))
                                     : fs::path(a.out);
  fs::create_directories(out);
  auto env = make_full_environment(config);
  env.vocab.save(out / "vocab.txt");
  std::ofstream log(out / "log.jsonl");
  if (!log) throw IoError("cannot write " + (out / "log.jsonl").string());
  std::cerr << "leakforge: " << to_string(config.mode) << " campaign, label " << config.ablation.label()
            << ", budget " << config.query_budget << ", output " << out.string() << "\n";
  const auto result = Campaign(config, env, &log).run();
  log.close();

  result.policy.save(out / "policy.bin");
  result.archive.save_jsonl(out / "archive.jsonl");
  nlohmann::ordered_json summary = {
      {"status", result.status == CampaignStatus::kOk ? "ok" : "budget_exhausted"},
      {"label", config.ablation.label()},
      {"episodes", result.episodes},
      {"training_queries", result.training_queries},
      {"total_queries", result.total_queries},
      {"archive_size", result.archive.size()}};
  if (result.eval) {
    summary["mean_wes"] = result.eval->mean_wes;
    summary["mean_rouge_l"] = result.eval->mean_rouge_l;
    std::ofstream(out / "eval.json") << to_json(*result.eval).dump(2) << "\n";
  }
  if (config.mode == Mode::kTrainingData) {
    summary["selected_doc"] = result.selected_doc ? nlohmann::ordered_json(*result.selected_doc) : nullptr;
    summary["asr"] = result.asr();
    summary["stage1_asr"] = result.stage1_asr();
  }
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return result.status == CampaignStatus::kOk ? kExitOk : kExitBudget;
}

nlohmann::ordered_json match_json(const std::optional<MatchResult>& m) {
  if (!m) return nullptr;
  return {{"doc_id", m->doc_id},           {"doc_begin", m->doc_begin},     {"doc_end", m->doc_end},
          {"query_begin", m->query_begin}, {"query_end", m->query_end}, {"matched_words", m->matched_words}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leakforge: RL-driven prompt leakage and training-data extraction harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "leakforge 0.1.0");

  CampaignArgs train_args, extract_args;
  auto* train = app.add_subcommand("train", "run a system-prompt extraction campaign");
  add_campaign_options(train, train_args);
  auto* extract = app.add_subcommand("extract-training-data", "run a two-stage training-data extraction campaign");
  add_campaign_options(extract, extract_args);

  std::string eval_archive, eval_test, eval_config, eval_out;
  std::optional<std::size_t> eval_top, eval_repeats;
  auto* evaluate = app.add_subcommand("evaluate", "score the best archived prompts on held-out system prompts");
  evaluate->add_option("--archive", eval_archive, "archive JSON Lines file")->required();
  evaluate->add_option("--test", eval_test, "held-out system prompts, one per line")->required();
  evaluate->add_option("-c,--config", eval_config, "config naming the target")->required();
  evaluate->add_option("--top", eval_top, "number of archived prompts to use");
  evaluate->add_option("--repeats", eval_repeats, "queries per (test prompt, attack prompt)");
  evaluate->add_option("-o,--out", eval_out, "write the report JSON here too");

  std::string report_log, report_csv;
  std::size_t report_window = 50;
  auto* report = app.add_subcommand("report", "summarize a campaign log");
  report->add_option("--log", report_log, "campaign log (JSON Lines)")->required();
  report->add_option("--csv", report_csv, "write the per-episode reward series as CSV");
  report->add_option("--window", report_window, "smoothing window")->check(CLI::PositiveNumber);

  auto* index = app.add_subcommand("index", "corpus suffix-array index");
  index->require_subcommand(1);
  std::string idx_corpus, idx_out, idx_file, idx_text, idx_text_file;
  IndexParams idx_params;
  auto* ibuild = index->add_subcommand("build", "build and save an index");
  ibuild->add_option("--corpus", idx_corpus, "corpus file (one document per line) or directory")->required();
  ibuild->add_option("-o,--out", idx_out, "index file")->required();
  ibuild->add_option("--min-match", idx_params.min_match_words, "minimum match length in words");
  ibuild->add_option("--saturation", idx_params.saturation_words, "stage-1 reward saturation length");
  auto* iquery = index->add_subcommand("query", "longest corpus match for a text");
  iquery->add_option("--index", idx_file, "index file")->required();
  auto* qt = iquery->add_option("--text", idx_text, "query text");
  auto* qf = iquery->add_option("--text-file", idx_text_file, "read the query text from a file");
  qt->excludes(qf);

  auto* metric = app.add_subcommand("metric", "text similarity metrics");
  metric->require_subcommand(1);
  std::string m_resp, m_target, m_resp_file, m_target_file;
  MetricParams m_params;
  auto* score = metric->add_subcommand("score", "reward breakdown of a response against a target");
  auto* r1 = score->add_option("--response", m_resp, "response text");
  auto* r2 = score->add_option("--response-file", m_resp_file, "response text file");
  auto* t1 = score->add_option("--target", m_target, "target text");
  auto* t2 = score->add_option("--target-file", m_target_file, "target text file");
  r1->excludes(r2);
  t1->excludes(t2);
  score->add_option("--lambda", m_params.lambda, "length-term weight");
  score->add_option("--k", m_params.k, "sigmoid slope");
  score->add_option("--x0", m_params.x0, "sigmoid midpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return run_campaign(train_args, Mode::kSysprompt);
    if (*extract) return run_campaign(extract_args, Mode::kTrainingData);

    if (*evaluate) {
      const auto config = load_config(eval_config);
      const auto env = make_full_environment(config);
      const auto archive = Archive::load_jsonl(eval_archive, config.diversity, config.metric);
      std::vector<std::string> prompts;
      for (const auto& e : archive.top(eval_top.value_or(config.eval.top_prompts)))
        prompts.push_back(e.prompt.source_text);
      const auto tests = read_lines(eval_test);
      QueryBudget budget(config.eval.eval_query_budget);
      const auto r = evaluate_top5(prompts, tests, *env.target, config.target, config.metric,
                                   eval_repeats.value_or(config.eval.repeats), derive_seed(config.seed, 5), budget);
      for (const auto& w : r.warnings) std::cerr << "leakforge: warning: " << w << "\n";
      const auto j = to_json(r).dump(2);
      if (!eval_out.empty()) std::ofstream(eval_out) << j << "\n";
      std::cout << j << "\n";
      return kExitOk;
    }

    if (*report) {
      std::ifstream in(report_log);
      if (!in) throw IoError("cannot read " + report_log);
      const auto s = summarize_log(in);
      if (s.skipped_lines) std::cerr << "leakforge: skipped " << s.skipped_lines << " unreadable log lines\n";
      if (!report_csv.empty()) {
        std::ofstream csv(report_csv);
        if (!csv) throw IoError("cannot write " + report_csv);
        write_series_csv(csv, s, report_window);
      }
      std::cout << to_json(s, report_window).dump(2) << "\n";
      return kExitOk;
    }

    if (*ibuild) {
      idx_params.validate();
      const auto t0 = std::chrono::steady_clock::now();
      const auto idx = CorpusIndex::build(Corpus::load(idx_corpus), idx_params);
      idx.save(idx_out);
      for (const auto& w : idx.warnings()) std::cerr << "leakforge: warning: " << w << "\n";
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
      std::cout << nlohmann::ordered_json{{"documents", idx.size()}, {"index", idx_out}, {"build_ms", ms.count()}}
                       .dump(2)
                << "\n";
      return kExitOk;
    }
    if (*iquery) {
      const auto idx = CorpusIndex::load(idx_file);
      const std::string text = idx_text_file.empty() ? idx_text : read_text(idx_text_file);
      const auto m = idx.longest_match(text);
      nlohmann::ordered_json j = {{"match", match_json(m)}, {"stage1_reward", stage1_reward(m, idx.params())}};
      if (m) {
        const auto words = tokenize(idx.document(m->doc_id)).words;
        j["document_excerpt"] = join_words(std::vector<std::string>(
            words.begin() + static_cast<std::ptrdiff_t>(m->doc_begin),
            words.begin() + static_cast<std::ptrdiff_t>(m->doc_end)));
      }
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }
    if (*score) {
      m_params.validate();
      const auto u = tokenize(m_resp_file.empty() ? m_resp : read_text(m_resp_file));
      const auto d = tokenize(m_target_file.empty() ? m_target : read_text(m_target_file));
      if (d.empty()) throw ConfigError("target text has no words");
      const auto b = reward(u, d, m_params);
      nlohmann::ordered_json j = {
          {"wed", b.wed},
          {"swes", std::isinf(b.swes) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(b.swes)},
          {"swes_norm", b.swes_norm},
          {"length_term", b.length_term},
          {"total", b.total},
          {"rouge_l", rouge_l(u, d)}};
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "leakforge: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "leakforge: invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "leakforge: error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
