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
#include <fstream>

#include "leakforge/leak_index.hpp"
#include "leakforge/synthetic.hpp"
#include "naive_span_oracle.hpp"

namespace leakforge {
namespace {

std::string words_of(const std::string& doc, std::size_t begin, std::size_t end) {
  const auto w = tokenize(doc).words;
  return join_words(std::span(w).subspan(begin, end - begin));
}

TEST(Corpus, DropsEmptyDocumentsAndCountsWords) {
  const auto c = Corpus::from_documents({"a b c", "   ", "d e"});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.total_words, 5u);
}

TEST(Corpus, LoadsLinesAndDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "leakforge_corpus_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "docs");
  {
    std::ofstream(dir / "lines.txt") << "first doc here\n\nsecond doc\r\n";
    std::ofstream(dir / "docs" / "b.txt") << "beta text";
    std::ofstream(dir / "docs" / "a.txt") << "alpha\ntext";
  }
  const auto lines = Corpus::load(dir / "lines.txt");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines.docs[1], "second doc");
  const auto files = Corpus::load(dir / "docs");
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files.docs[0], "alpha\ntext");
  EXPECT_THROW(Corpus::load(dir / "missing.txt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(IndexParams, Validation) {
  IndexParams p;
  EXPECT_NO_THROW(p.validate());
  p.min_match_words = 1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.saturation_words = 4;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(CorpusIndex, RejectsEmptyCorpus) {
  EXPECT_THROW(CorpusIndex::build(Corpus{}), InvalidArgument);
}

TEST(CorpusIndex, AnswersTwoGramContainment) {
  const auto c = Corpus::from_documents({"red fox jumps", "blue fox sleeps", "green owl hoots"});
  const auto index = CorpusIndex::build(c, {2, 2});
  const auto m = index.longest_match("the blue fox ran");
  ASSERT_TRUE(m);
  EXPECT_EQ(m->doc_id, 1u);
  EXPECT_EQ(m->matched_words, 2u);
  EXPECT_EQ(m->query_begin, 1u);
  EXPECT_FALSE(index.longest_match("jumps fox? no: owl fox"));
  EXPECT_TRUE(index.longest_match("owl hoots"));
  // Spans never cross document boundaries.
  EXPECT_EQ(index.longest_match("fox jumps blue fox")->matched_words, 2u);
}

TEST(CorpusIndex, ShortDocumentIsNeverMatchableButBuildWarns) {
  const auto c = Corpus::from_documents(
      {"tiny doc", "one two three four five six seven eight nine ten"});
  const auto index = CorpusIndex::build(c, {8, 32});
  ASSERT_EQ(index.warnings().size(), 1u);
  EXPECT_NE(index.warnings()[0].find("document 0"), std::string::npos);
  EXPECT_FALSE(index.longest_match("tiny doc"));
  EXPECT_TRUE(index.longest_match(c.docs[1]));
}

TEST(CorpusIndex, DuplicateDocumentsReportLowestId) {
  const std::string doc = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
  const auto c = Corpus::from_documents({"unrelated words only", doc, doc});
  const auto index = CorpusIndex::build(c, {8, 32});
  const auto m = index.longest_match("xx " + doc + " yy");
  ASSERT_TRUE(m);
  EXPECT_EQ(m->doc_id, 1u);
  EXPECT_EQ(m->matched_words, 10u);
  EXPECT_EQ(index.document(1), doc);
  EXPECT_EQ(index.document(2), doc);
}

TEST(CorpusIndex, Examples) {
  synthetic::CorpusParams p;
  p.documents = 40;
  const auto c = synthetic::corpus(p);
  const auto index = CorpusIndex::build(c, {8, 32});

  const std::string span12 = words_of(c.docs[3], 5, 17);
  const auto m = index.longest_match("lorem ipsum " + span12 + " dolor");
  ASSERT_TRUE(m);
  EXPECT_EQ(m->doc_id, 3u);
  EXPECT_EQ(m->matched_words, 12u);
  EXPECT_EQ(m->doc_begin, 5u);
  EXPECT_EQ(m->query_begin, 2u);
  EXPECT_EQ(words_of(c.docs[3], m->doc_begin, m->doc_end), span12);

  const std::string span7 = words_of(c.docs[3], 5, 12);
  EXPECT_FALSE(index.longest_match("zz " + span7 + " zz"));
  EXPECT_FALSE(index.longest_match(""));
}

TEST(CorpusIndex, AgreesWithNaiveScan) {
  synthetic::CorpusParams p;
  p.documents = 300;
  p.common_vocabulary = 20;
  p.common_fraction = 0.8;
  p.rare_vocabulary = 200;
  const auto c = synthetic::corpus(p);
  const auto index = CorpusIndex::build(c, {3, 32});
  testing::NaiveSpanOracle oracle(c.docs, 3);
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::string q;
    const auto pieces = 1 + rng.below(4);
    for (std::size_t k = 0; k < pieces; ++k) {
      const auto d = rng.below(c.size());
      const auto n = tokenize(c.docs[d]).size();
      const auto b = rng.below(n);
      const auto e = std::min<std::size_t>(n, b + 1 + rng.below(15));
      q += words_of(c.docs[d], b, e) + " " + synthetic::pseudo_word(rng.below(300)) + " ";
    }
    ASSERT_EQ(index.longest_match(q), oracle.longest_match(q)) << q;
  }
}

TEST(CorpusIndex, ExtendingWithDocumentWordsNeverShortensMatch) {
  synthetic::CorpusParams p;
  p.documents = 100;
  const auto c = synthetic::corpus(p);
  const auto index = CorpusIndex::build(c, {4, 32});
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = rng.below(c.size());
    const auto words = tokenize(c.docs[d]).words;
    const auto b = rng.below(words.size() - 10);
    std::string q = "noise " + join_words(std::span(words).subspan(b, 6));
    auto m = index.longest_match(q);
    ASSERT_TRUE(m);
    for (std::size_t extra = 1; m->doc_end + extra <= tokenize(index.document(m->doc_id)).size() && extra < 5; ++extra) {
      const auto dw = tokenize(index.document(m->doc_id)).words;
      const auto longer = q + " " + join_words(std::span(dw).subspan(m->doc_end, extra));
      ASSERT_GE(index.longest_match(longer)->matched_words, m->matched_words);
    }
  }
}

TEST(CorpusIndex, BuildsAreBitStableAndSurviveSaveLoad) {
  synthetic::CorpusParams p;
  p.documents = 200;
  const auto c = synthetic::corpus(p);
  const auto a = CorpusIndex::build(c, {8, 32});
  const auto b = CorpusIndex::build(c, {8, 32});
  const auto path = std::filesystem::temp_directory_path() / "leakforge_index_test.bin";
  a.save(path);
  const auto loaded = CorpusIndex::load(path);
  EXPECT_EQ(loaded.params().min_match_words, 8u);
  EXPECT_EQ(loaded.size(), c.size());
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = rng.below(c.size());
    const auto q = "x " + words_of(c.docs[d], 0, 20) + " y";
    EXPECT_EQ(a.longest_match(q), b.longest_match(q));
    EXPECT_EQ(a.longest_match(q), loaded.longest_match(q));
  }
  std::ofstream(path, std::ios::binary) << "garbage!";
  EXPECT_THROW(CorpusIndex::load(path), IoError);
  std::filesystem::remove(path);
}

TEST(CorpusIndex, GetDocumentBounds) {
  const auto c = Corpus::from_documents({"  keep   exact\tspacing ", "b"});
  const auto index = CorpusIndex::build(c, {2, 2});
  EXPECT_EQ(index.document(0), "  keep   exact\tspacing ");
  EXPECT_THROW(index.document(2), InvalidArgument);
}

TEST(Stage1Reward, Examples) {
  const IndexParams p{8, 32};
  EXPECT_EQ(stage1_reward(std::nullopt, p), 0.0);
  EXPECT_EQ(stage1_reward(MatchResult{0, 0, 32, 0, 32, 32}, p), 1.0);
  EXPECT_EQ(stage1_reward(MatchResult{0, 0, 16, 0, 16, 16}, p), 0.5);
  double prev = 0.0;
  for (std::size_t n = 8; n < 80; ++n) {
    const double r = stage1_reward(MatchResult{0, 0, n, 0, n, n}, p);
    ASSERT_GE(r, prev);
    ASSERT_LE(r, 1.0);
    prev = r;
  }
}

}  // namespace
}  // namespace leakforge
