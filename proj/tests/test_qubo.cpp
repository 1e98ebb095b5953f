// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qscreen/qubo.hpp"
#include "qscreen/random.hpp"

namespace qscreen {
namespace {

BitVector bits(std::string_view s) { return BitVector::from_string(s); }

QuboModel random_model(std::size_t n, Rng& rng, double scale = 1.0) {
  QuboModel m(n);
  for (auto& v : m.linear_terms()) v = rng.uniform(-scale, scale);
  for (auto& v : m.quadratic_terms()) v = rng.uniform(-scale, scale);
  return m;
}

BitVector from_code(std::uint64_t code, std::size_t n) {
  BitVector x(n);
  for (std::size_t i = 0; i < n; ++i) x.set(i, (code >> i) & 1u);
  return x;
}

TEST(Expand, AllZeros) { EXPECT_TRUE(expand_quadratic(bits("000"), 3).empty()); }

TEST(Expand, TwoBits) {
  // diagonal 0, diagonal 1, pair (0,1) at position n + 0
  EXPECT_EQ(expand_quadratic(bits("110"), 3), (std::vector<std::size_t>{0, 1, 3}));
}

TEST(Expand, AllOnes) {
  const auto f = expand_quadratic(bits("111"), 3);
  EXPECT_EQ(f.size(), 6u);
  EXPECT_EQ(f, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(Expand, WidthMismatch) { EXPECT_THROW(expand_quadratic(bits("11"), 3), Error); }

TEST(Expand, MatchesPairIndexLayout) {
  QuboModel m(6);
  for (std::uint64_t code = 0; code < 64; ++code) {
    const auto x = from_code(code, 6);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < 6; ++i) {
      if (x.test(i)) expect.push_back(i);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i + 1; j < 6; ++j) {
        if (x.test(i) && x.test(j)) expect.push_back(6 + m.pair_index(i, j));
      }
    }
    EXPECT_EQ(expand_quadratic(x, 6), expect);
  }
}

TEST(QuboModel, Layout) {
  QuboModel m(4);
  EXPECT_EQ(m.feature_count(), 4u + 6u);
  EXPECT_EQ(m.pair_index(0, 1), 0u);
  EXPECT_EQ(m.pair_index(0, 3), 2u);
  EXPECT_EQ(m.pair_index(1, 2), 3u);
  EXPECT_EQ(m.pair_index(2, 3), 5u);
  EXPECT_EQ(m.pair_index(3, 2), 5u);
  m.quadratic(2, 1) = 7.0;
  EXPECT_EQ(m.quadratic(1, 2), 7.0);
  QuboModel one(1);
  EXPECT_EQ(one.quadratic_terms().size(), 0u);
}

TEST(Predict, HandValues) {
  QuboModel m(2);
  m.linear(0) = 2;
  m.linear(1) = 3;
  m.quadratic(0, 1) = 5;
  EXPECT_EQ(predict(m, bits("00")), 0.0);
  EXPECT_EQ(predict(m, bits("11")), 10.0);
  EXPECT_EQ(predict(m, bits("10")), 2.0);
  EXPECT_EQ(predict(m, bits("01")), 3.0);
  EXPECT_THROW(predict(m, bits("1")), Error);
}

TEST(Predict, EqualsExpandedDotProductExhaustively) {
  Rng rng(99);
  for (std::size_t n : {1u, 2u, 5u, 9u}) {
    const auto m = random_model(n, rng);
    const auto w = m.coefficients();
    for (std::uint64_t code = 0; code < (1u << n); ++code) {
      const auto x = from_code(code, n);
      double dot = 0.0;
      for (auto k : expand_quadratic(x, n)) dot += w[k];
      EXPECT_NEAR(predict(m, x), dot, 1e-12);
    }
  }
}

TEST(R2, Values) {
  const std::vector<double> y{1, 2, 3, 4};
  EXPECT_EQ(r2_score(y, y), 1.0);
  const std::vector<double> mean(4, 2.5);
  EXPECT_EQ(r2_score(y, mean), 0.0);
  EXPECT_DOUBLE_EQ(r2_score(std::vector<double>{0, 1}, std::vector<double>{1, 0}), -3.0);
}

TEST(R2, Errors) {
  try {
    r2_score(std::vector<double>{1, 1}, std::vector<double>{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVariance);
  }
  try {
    r2_score(std::vector<double>{1, 2}, std::vector<double>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
}

TEST(QuboFile, Format) {
  QuboModel m(3);
  m.quadratic(0, 1) = 0.5;
  m.linear(2) = -1.25;
  std::ostringstream out;
  write_qubo(out, m);
  EXPECT_EQ(out.str(), "n 3\n0 1 0.5\n2 2 -1.25\n");
}

TEST(QuboFile, ZeroModelElidesEntries) {
  std::ostringstream out;
  write_qubo(out, QuboModel(1));
  EXPECT_EQ(out.str(), "n 1\n");
}

TEST(QuboFile, RoundTripIsBitExact) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    auto m = random_model(1 + rng.below(12), rng, std::pow(10.0, rng.uniform(-8, 8)));
    m.linear(0) = 0.1 + 0.2;  // classic non-representable sum
    std::ostringstream out;
    write_qubo(out, m);
    std::istringstream in(out.str());
    EXPECT_EQ(read_qubo(in), m);
  }
}

TEST(QuboFile, FileRoundTrip) {
  Rng rng(6);
  const auto m = random_model(7, rng);
  const auto path = std::filesystem::temp_directory_path() / "qscreen_test_model.txt";
  export_qubo(m, path);
  EXPECT_EQ(import_qubo(path), m);
  std::filesystem::remove(path);
}

TEST(QuboFile, RejectsMalformed) {
  for (const char* text : {"", "m 3\n", "n 0\n", "n 2\n0 2 1\n", "n 2\n1 0 1\n", "n 2\n0 0 x\n",
                           "n 2\n0 1 1\n0 1 2\n", "n 2\n0 1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_qubo(in), Error) << text;
  }
  EXPECT_THROW(import_qubo("/nonexistent/qubo.txt"), Error);
}

}  // namespace
}  // namespace qscreen
