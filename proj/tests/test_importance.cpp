// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include <gtest/gtest.h>

#include "qscreen/annealer.hpp"
#include "qscreen/importance.hpp"
#include "qscreen/random.hpp"

namespace qscreen {
namespace {

SampleSet counted(const std::vector<std::pair<std::string, std::uint64_t>>& rows) {
  SampleSet s;
  for (const auto& [b, c] : rows) {
    s.entries.push_back({BitVector::from_string(b), 0.0, c});
    s.total_reads += c;
  }
  return s;
}

TEST(Frequency, AlwaysOnBitScoresHalf) {
  const auto score = frequency_importance(counted({{"10", 3}, {"11", 5}}));
  EXPECT_EQ(score[0], 0.5);
  EXPECT_DOUBLE_EQ(score[1], 5.0 / 8.0 - 0.5);
}

TEST(Frequency, BalancedPairScoresZero) {
  const auto score = frequency_importance(counted({{"10", 4}, {"01", 4}}));
  EXPECT_EQ(score[0], 0.0);
  EXPECT_EQ(score[1], 0.0);
  const auto freq = bit_frequency(counted({{"10", 1}, {"01", 3}}));
  EXPECT_EQ(freq[0], 0.25);
  EXPECT_EQ(freq[1], 0.75);
}

TEST(Frequency, UniformRandomBitsScoreNearZero) {
  Rng rng(1);
  std::vector<BitVector> configs;
  for (int r = 0; r < 10000; ++r) {
    BitVector x(16);
    for (std::size_t i = 0; i < 16; ++i) x.set(i, rng.coin());
    configs.push_back(x);
  }
  const auto score = frequency_importance(aggregate_samples(QuboModel(16), configs, 0));
  for (double s : score) EXPECT_LE(s, 0.02);
}

TEST(Frequency, EmptySet) {
  EXPECT_THROW(frequency_importance(SampleSet{}), Error);
  EXPECT_THROW(bit_frequency(SampleSet{}), Error);
}

TEST(TopK, OrderAndTies) {
  const std::vector<double> s{0.1, 0.5, 0.3, 0.5, 0.0};
  EXPECT_EQ(select_top_k(s, 3), (std::vector<std::size_t>{1, 3, 2}));
  EXPECT_EQ(select_top_k(s, 10).size(), 5u);
  EXPECT_EQ(select_top_k(s, 1), (std::vector<std::size_t>{1}));
  EXPECT_THROW(select_top_k(s, 0), Error);
}

TEST(Polarity, ReadsBitsOfOptimum) {
  const auto x = BitVector::from_string("10110");
  const std::vector<std::size_t> top{2, 1, 0};
  const auto c = assign_polarity(top, x);
  EXPECT_EQ(c, (std::vector<Constraint>{{2, true}, {1, false}, {0, true}}));
  const std::vector<std::size_t> bad{5};
  try {
    assign_polarity(bad, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IndexOutOfRange);
  }
}

TEST(Analyze, GainAndFrequencyMetrics) {
  SampleSet s;
  Rng rng(2);
  std::vector<BitVector> configs;
  for (int r = 0; r < 400; ++r) {
    BitVector x(6);
    for (std::size_t i = 0; i < 6; ++i) x.set(i, rng.uniform() < (i == 4 ? 0.95 : 0.5));
    configs.push_back(x);
  }
  QuboModel m(6);
  m.linear(1) = -3.0;
  const auto set = aggregate_samples(m, configs, 0);
  const auto x_opt = BitVector::from_string("010010");
  const auto by_gain = analyze_importance(set, x_opt, GbdtConfig{}, 2);
  EXPECT_EQ(by_gain.top_k.front(), 1u);
  EXPECT_TRUE(by_gain.polarity.front().bit);
  const auto by_freq = analyze_importance(set, x_opt, GbdtConfig{}, 1, ImportanceMetric::Frequency);
  EXPECT_EQ(by_freq.top_k.front(), 4u);

  const auto j = to_json(by_gain, GbdtConfig{});
  for (const char* key : {"gain", "frequency", "frequency_score", "top_k", "polarity", "config"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["polarity"][0], nlohmann::json::array({1, 1}));
  EXPECT_EQ(j["config"]["metric"], "gain");
  EXPECT_EQ(importance_metric_from_string("frequency"), ImportanceMetric::Frequency);
  EXPECT_THROW(importance_metric_from_string("shap"), Error);
}

}  // namespace
}  // namespace qscreen
