#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "intendd/keyphrase.hpp"

using namespace intendd;

namespace {

Dataset texts(const std::vector<std::string>& ts) {
  Dataset ds;
  for (std::size_t i = 0; i < ts.size(); ++i) ds.utterances.push_back({"u" + std::to_string(i), ts[i], {}, Split::train});
  return ds;
}

const NgramStats* find(const NgramTable& t, const std::string& g) {
  for (const auto& s : t.stats)
    if (s.ngram == g) return &s;
  return nullptr;
}

}  // namespace

TEST(Ngrams, Enumeration) {
  auto t = extract_ngrams(texts({"book a flight"}), {}, 2);
  std::vector<std::string> got;
  for (const auto& s : t.stats) {
    got.push_back(s.ngram);
    EXPECT_EQ(s.df_target, 1u);
  }
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"a", "a flight", "book", "book a", "flight"}));
}

TEST(Ngrams, DocumentFrequencyCountsOncePerUtterance) {
  auto t = extract_ngrams(texts({"go go go"}), {}, 1);
  EXPECT_EQ(find(t, "go")->df_target, 1u);
}

TEST(Ngrams, UnionIncludesBackground) {
  BackgroundCorpus bg{{"Book a flight!"}};
  auto t = extract_ngrams(texts({"book a flight"}), bg, 3);
  EXPECT_EQ(find(t, "book a flight")->df_union, 2u);
  EXPECT_EQ(find(t, "book")->df_union, 2u);
  EXPECT_EQ(t.n_target, 1u);
  EXPECT_EQ(t.n_union, 2u);
}

TEST(Ngrams, TokenizerLowercasesAndSplits) {
  EXPECT_EQ(tokenize("Hello,  WORLD-wide"), (std::vector<std::string>{"hello", "world", "wide"}));
}

TEST(Score, RatioOneGivesZero) { EXPECT_DOUBLE_EQ(score_keyphrase(3, 10, 100, 50, 500), 0.0); }

TEST(Score, SingleUnionDocumentGivesZero) { EXPECT_DOUBLE_EQ(score_keyphrase(1, 1, 1, 10, 20), 0.0); }

TEST(Score, WorkedValue) {
  // 1^2 * ln(12) * ln(10 * 1000 / (12 * 100)), evaluated independently.
  const double expected = std::log(12.0) * std::log(10000.0 / 1200.0);
  EXPECT_NEAR(score_keyphrase(1, 10, 12, 100, 1000), expected, 1e-12);
  EXPECT_NEAR(score_keyphrase(1, 10, 12, 100, 1000), 5.27, 5e-3);
}

TEST(Score, LengthBoostIsSquare) {
  const double uni = score_keyphrase(1, 7, 9, 40, 400);
  EXPECT_NEAR(score_keyphrase(2, 7, 9, 40, 400), 4 * uni, 1e-12);
  EXPECT_NEAR(score_keyphrase(3, 7, 9, 40, 400), 9 * uni, 1e-12);
}

TEST(Score, MonotoneInTargetFrequency) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_t = 50 + rng() % 100, n_u = n_t + 1 + rng() % 1000;
    const std::size_t df_u = 2 + rng() % (n_u - 1);
    double prev = -1e300;
    for (std::size_t df_t = 1; df_t <= std::min(df_u, n_t); ++df_t) {
      const double s = score_keyphrase(2, df_t, df_u, n_t, n_u);
      EXPECT_GE(s, prev);
      prev = s;
    }
  }
}

TEST(KeyphraseSet, MinDfFilters) {
  auto t = extract_ngrams(texts({"alpha beta", "alpha gamma", "delta"}), BackgroundCorpus{{"zzz", "yyy"}}, 1);
  EXPECT_TRUE(build_keyphrase_set(t, 5).empty());
}

TEST(KeyphraseSet, TiesBrokenLexicographically) {
  NgramTable t;
  t.n_target = 10;
  t.n_union = 100;
  t.stats.push_back({"zeta", 5, 6, {}});
  t.stats.push_back({"alpha", 5, 6, {}});
  auto set = build_keyphrase_set(t, 1);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.items[0].ngram, "alpha");
  EXPECT_EQ(set.items[1].ngram, "zeta");
}

TEST(KeyphraseSet, TopKKeepsHighest) {
  NgramTable t;
  t.n_target = 200;
  t.n_union = 2000;
  for (int i = 0; i < 100; ++i) t.stats.push_back({"g" + std::to_string(i), static_cast<std::size_t>(10 + i), static_cast<std::size_t>(20 + i), {}});
  auto all = build_keyphrase_set(t, 1, 1000);
  auto top = build_keyphrase_set(t, 1, 50);
  ASSERT_EQ(all.size(), 100u);
  ASSERT_EQ(top.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(top.items[i].ngram, all.items[i].ngram);
  EXPECT_GE(top.items.back().score, all.items[50].score);
}

TEST(KeyphraseSet, DefaultMinDfIsFive) {
  // The selection keeps phrases present at least five times in the dataset.
  NgramTable t;
  t.n_target = 10;
  t.n_union = 100;
  t.stats.push_back({"four", 4, 4, {}});
  t.stats.push_back({"five", 5, 5, {}});
  auto set = build_keyphrase_set(t);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.items[0].ngram, "five");
}

TEST(KeyphraseSet, OrderInvariant) {
  std::vector<std::string> ts;
  const std::vector<std::string> words = {"card", "lost", "pin", "reset", "balance", "check"};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 60; ++i) ts.push_back(words[rng() % 6] + " " + words[rng() % 6] + " " + words[rng() % 6]);
  BackgroundCorpus bg{{"check the weather", "reset my alarm", "play music"}};
  auto a = build_keyphrase_set(extract_ngrams(texts(ts), bg), 5);
  std::reverse(ts.begin(), ts.end());
  auto b = build_keyphrase_set(extract_ngrams(texts(ts), bg), 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.items[i].ngram, b.items[i].ngram);
    EXPECT_DOUBLE_EQ(a.items[i].score, b.items[i].score);
  }
}

TEST(KeyphraseSet, TsvRoundTripAndReindex) {
  std::vector<std::string> ts(6, "reset pin now");
  ts.push_back("other words");
  auto ds = texts(ts);
  auto set = build_keyphrase_set(extract_ngrams(ds, {{"now then"}}), 5);
  ASSERT_FALSE(set.empty());
  std::stringstream s;
  write_keyphrase_tsv(s, set);
  auto back = read_keyphrase_tsv(s);
  index_keyphrases(back, ds);
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back.items[i].ngram, set.items[i].ngram);
    EXPECT_EQ(back.items[i].score, set.items[i].score);
    EXPECT_EQ(back.postings(back.items[i].ngram), set.postings(set.items[i].ngram));
  }
}
