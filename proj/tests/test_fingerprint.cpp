// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qscreen/fingerprint.hpp"
#include "qscreen/random.hpp"

namespace qscreen {
namespace {

FingerprintVector fp_of(std::string_view smiles, int radius = kDefaultRadius, std::size_t nbits = 512) {
  return circular_fingerprint(parse_smiles(smiles), radius, nbits);
}

std::vector<FingerprintVector> vectors(std::initializer_list<const char*> rows) {
  std::vector<FingerprintVector> out;
  for (const char* r : rows) out.push_back(BitVector::from_string(r));
  return out;
}

TEST(Fingerprint, SingleAtomRadiusZero) {
  const auto fp = fp_of("C", 0);
  EXPECT_EQ(fp.width(), 512u);
  EXPECT_EQ(fp.popcount(), 1u);
}

TEST(Fingerprint, EquivalentAtomsShareIdentifier) {
  EXPECT_EQ(fp_of("CC", 0).popcount(), 1u);
}

TEST(Fingerprint, HeteroatomPairRadiusOne) {
  const auto n = fp_of("CO", 1).popcount();
  EXPECT_GE(n, 2u);
  EXPECT_LE(n, 4u);
  EXPECT_EQ(n, 4u);  // no collisions for this pair under hash version 1
}

TEST(Fingerprint, InvariantUnderAtomOrder) {
  EXPECT_EQ(fp_of("CO"), fp_of("OC"));
  EXPECT_EQ(fp_of("CCO"), fp_of("OCC"));
  EXPECT_EQ(fp_of("CC(C)O"), fp_of("OC(C)C"));
  EXPECT_EQ(fp_of("c1ccccc1O"), fp_of("Oc1ccccc1"));
  EXPECT_EQ(fp_of("C1CCNCC1"), fp_of("N1CCCCC1"));
}

TEST(Fingerprint, DistinguishesStructure) {
  EXPECT_NE(fp_of("CCO"), fp_of("COC"));
  EXPECT_NE(fp_of("C=C"), fp_of("CC"));
  EXPECT_NE(fp_of("c1ccccc1"), fp_of("C1CCCCC1"));
}

TEST(Fingerprint, ExplicitHydrogensDoNotAddAtoms) {
  EXPECT_EQ(fp_of("[H]C([H])([H])[H]"), fp_of("C"));
}

TEST(Fingerprint, RadiusGrowsBitSet) {
  const auto g = parse_smiles("CC(=O)NCc1ccccc1");
  std::size_t prev = 0;
  for (int r = 0; r <= 4; ++r) {
    const auto fp = circular_fingerprint(g, r, 2048);
    EXPECT_GE(fp.popcount(), prev);
    prev = fp.popcount();
  }
}

TEST(Fingerprint, RejectsBadParameters) {
  const auto g = parse_smiles("C");
  EXPECT_THROW(circular_fingerprint(g, 2, 7), Error);
  try {
    circular_fingerprint(g, 2, 4);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidWidth);
  }
  EXPECT_THROW(circular_fingerprint(g, 5, 512), Error);
  EXPECT_THROW(circular_fingerprint(g, -1, 512), Error);
}

TEST(Fingerprint, Deterministic) {
  // Pinned bits guard against accidental changes to the hash.
  EXPECT_EQ(fp_of("C", 0).ones(), fp_of("C", 0).ones());
  const auto a = fp_of("CC(=O)O");
  const auto b = fp_of("CC(=O)O");
  EXPECT_EQ(a, b);
}

TEST(Precomputed, ReadsBits) {
  std::istringstream in("0101\n");
  const auto fps = read_precomputed(in);
  ASSERT_EQ(fps.size(), 1u);
  EXPECT_EQ(fps[0].width(), 4u);
  EXPECT_EQ(fps[0].ones(), (std::vector<std::uint32_t>{1, 3}));
}

TEST(Precomputed, InconsistentWidthReportsLine) {
  std::istringstream in("01\n011\n");
  try {
    read_precomputed(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InconsistentWidth);
    EXPECT_EQ(e.location(), 2u);
  }
}

TEST(Precomputed, NonBinaryReportsLine) {
  std::istringstream in("0101\n0121\n");
  try {
    read_precomputed(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonBinaryCharacter);
    EXPECT_EQ(e.location(), 2u);
  }
}

TEST(Precomputed, ToleratesCrlfAndRoundTrips) {
  std::istringstream in("0110\r\n1001\r\n");
  const auto fps = read_precomputed(in);
  ASSERT_EQ(fps.size(), 2u);
  std::ostringstream out;
  write_fingerprints(out, fps);
  EXPECT_EQ(out.str(), "0110\n1001\n");
}

TEST(Precomputed, MissingFile) {
  try {
    load_precomputed("/nonexistent/fingerprints.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(Compression, KeepsFrequentColumns) {
  const auto map = fit_compression(vectors({"1010", "1000", "1001"}), 2);
  EXPECT_EQ(map.kept_columns, (std::vector<std::size_t>{0}));
  EXPECT_EQ(map.train_counts, (std::vector<std::size_t>{3, 0, 1, 1}));
  EXPECT_EQ(map.original_width, 4u);
}

TEST(Compression, ZeroColumnDroppedAtThresholdOne) {
  const auto map = fit_compression(vectors({"110", "010"}), 1);
  EXPECT_EQ(map.kept_columns, (std::vector<std::size_t>{0, 1}));
}

TEST(Compression, EmptyTrainSet) {
  try {
    fit_compression({}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyTrainSet);
  }
}

TEST(Compression, Apply) {
  CompressedFeatureMap map{{0, 2}, 4, 1, {1, 0, 1, 0}};
  EXPECT_EQ(apply_compression(map, BitVector::from_string("1010")).to_string(), "11");
  CompressedFeatureMap none{{}, 4, 1, {0, 0, 0, 0}};
  EXPECT_EQ(apply_compression(none, BitVector::from_string("1111")).width(), 0u);
  CompressedFeatureMap last{{3}, 4, 1, {0, 0, 0, 1}};
  EXPECT_EQ(apply_compression(last, BitVector::from_string("0001")).to_string(), "1");
  EXPECT_THROW(apply_compression(map, BitVector::from_string("101")), Error);
}

TEST(Compression, FractionRoundsDown) {
  EXPECT_EQ(threshold_from_fraction(0.14, 110000), 15400u);
  EXPECT_EQ(threshold_from_fraction(0.5, 7), 3u);
  EXPECT_THROW(threshold_from_fraction(0.0, 10), Error);
  EXPECT_THROW(threshold_from_fraction(1.5, 10), Error);
}

TEST(Compression, InvariantsOnRandomData) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FingerprintVector> train;
    for (int r = 0; r < 40; ++r) {
      BitVector v(64);
      for (std::size_t i = 0; i < 64; ++i) v.set(i, rng.uniform() < (i % 8) / 8.0);
      train.push_back(v);
    }
    const std::size_t threshold = 1 + rng.below(30);
    const auto map = fit_compression(train, threshold);
    EXPECT_TRUE(std::is_sorted(map.kept_columns.begin(), map.kept_columns.end()));
    std::size_t k = 0;
    for (std::size_t c = 0; c < 64; ++c) {
      const bool kept = k < map.kept_columns.size() && map.kept_columns[k] == c;
      if (kept) ++k;
      EXPECT_EQ(kept, map.train_counts[c] >= threshold);
    }
    for (const auto& v : train) {
      const auto out = apply_compression(map, v);
      EXPECT_EQ(out.width(), map.width());
      EXPECT_LE(out.popcount(), v.popcount());
    }
  }
}

TEST(Compression, JsonRoundTrip) {
  const auto map = fit_compression(vectors({"1010", "1100", "1001"}), 2);
  EXPECT_EQ(feature_map_from_json(to_json(map)), map);
}

}  // namespace
}  // namespace qscreen
