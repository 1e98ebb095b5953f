// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qscreen/bitvec.hpp"
#include "qscreen/error.hpp"
#include "qscreen/random.hpp"
#include "qscreen/smiles.hpp"

namespace qscreen {

inline constexpr int kDefaultRadius = 2;
inline constexpr std::size_t kDefaultFingerprintBits = 512;

/// Version tag of the circular fingerprint hash. Bump whenever the identifier
/// derivation below changes, since stored fingerprints stop being comparable.
inline constexpr int kFingerprintHashVersion = 1;

namespace detail {

inline constexpr std::uint64_t kFingerprintSeed = 0x51ed270b27a3c4f1ULL;

constexpr std::uint64_t fp_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ (v * 0xff51afd7ed558ccdULL));
}

constexpr std::uint64_t bond_code(BondOrder order) noexcept {
  return static_cast<std::uint64_t>(order);
}

}  // namespace detail

/// ECFP-style hashed circular fingerprint over heavy atoms.
///
/// Round 0 identifier of an atom hashes (atomic number, aromatic flag, heavy
/// degree, formal charge, total H count). Round r rehashes the atom's previous
/// identifier with r, its heavy-neighbour count and the sorted list of
/// (bond order, neighbour identifier) pairs. Every identifier of every round
/// sets bit (identifier mod nbits). Hash: fp_combine(h, v) =
/// splitmix64(h xor v * 0xff51afd7ed558ccd), seeded with kFingerprintSeed.
inline FingerprintVector circular_fingerprint(const MolecularGraph& graph,
                                              int radius = kDefaultRadius,
                                              std::size_t nbits = kDefaultFingerprintBits) {
  if (nbits < 8) {
    throw Error(Errc::InvalidWidth, "fingerprint width must be >= 8, got " + std::to_string(nbits));
  }
  if (radius < 0 || radius > 4) {
    throw Error(Errc::ConfigInvalid, "fingerprint radius must be in [0, 4], got " + std::to_string(radius));
  }

  const auto adj = graph.adjacency();
  std::vector<std::size_t> heavy;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (graph.atoms[i].element != Element::H) heavy.push_back(i);
  }

  std::vector<std::uint64_t> ids(graph.size(), 0);
  for (std::size_t i : heavy) {
    const Atom& a = graph.atoms[i];
    std::uint64_t degree = 0;
    for (const auto& [j, order] : adj[i]) {
      if (graph.atoms[j].element != Element::H) ++degree;
    }
    std::uint64_t h = detail::kFingerprintSeed;
    h = detail::fp_combine(h, static_cast<std::uint64_t>(atomic_number(a.element)));
    h = detail::fp_combine(h, a.aromatic ? 1 : 0);
    h = detail::fp_combine(h, degree);
    h = detail::fp_combine(h, static_cast<std::uint64_t>(a.formal_charge + 128));
    h = detail::fp_combine(h, static_cast<std::uint64_t>(graph.hydrogen_count(i, adj)));
    ids[i] = h;
  }

  FingerprintVector fp(nbits);
  for (std::size_t i : heavy) fp.set(ids[i] % nbits);

  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int round = 1; round <= radius; ++round) {
    std::vector<std::uint64_t> next(ids.size(), 0);
    for (std::size_t i : heavy) {
      env.clear();
      for (const auto& [j, order] : adj[i]) {
        if (graph.atoms[j].element == Element::H) continue;
        env.emplace_back(detail::bond_code(order), ids[j]);
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = detail::fp_combine(ids[i], static_cast<std::uint64_t>(round));
      h = detail::fp_combine(h, env.size());
      for (const auto& [code, nid] : env) {
        h = detail::fp_combine(detail::fp_combine(h, code), nid);
      }
      next[i] = h;
    }
    ids = std::move(next);
    for (std::size_t i : heavy) fp.set(ids[i] % nbits);
  }
  return fp;
}

/// Reads one '0'/'1' string per line. All lines must share one width.
inline std::vector<FingerprintVector> read_precomputed(std::istream& in) {
  std::vector<FingerprintVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!out.empty() && line.size() != out.front().width()) {
      throw Error(Errc::InconsistentWidth,
                  "line " + std::to_string(line_no) + ": width " + std::to_string(line.size()) +
                      ", expected " + std::to_string(out.front().width()),
                  line_no);
    }
    try {
      out.push_back(FingerprintVector::from_string(line));
    } catch (const Error&) {
      throw Error(Errc::NonBinaryCharacter,
                  "line " + std::to_string(line_no) + ": non-binary character", line_no);
    }
  }
  return out;
}

inline std::vector<FingerprintVector> load_precomputed(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_precomputed(in);
}

inline void write_fingerprints(std::ostream& out, const std::vector<FingerprintVector>& fps) {
  for (const auto& fp : fps) out << fp.to_string() << '\n';
}

struct CompressedFeatureMap {
  std::vector<std::size_t> kept_columns;
  std::size_t original_width = 0;
  std::size_t threshold = 1;
  std::vector<std::size_t> train_counts;

  std::size_t width() const noexcept { return kept_columns.size(); }

  friend bool operator==(const CompressedFeatureMap&, const CompressedFeatureMap&) = default;
};

/// Keeps every column whose count of 1s over `train` is >= threshold.
inline CompressedFeatureMap fit_compression(const std::vector<FingerprintVector>& train,
                                            std::size_t threshold) {
  if (train.empty()) throw Error(Errc::EmptyTrainSet, "fit_compression: empty train set");
  CompressedFeatureMap map;
  map.original_width = train.front().width();
  map.threshold = threshold;
  map.train_counts.assign(map.original_width, 0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    if (train[r].width() != map.original_width) {
      throw Error(Errc::WidthMismatch, "fit_compression: row " + std::to_string(r) +
                                           " has width " + std::to_string(train[r].width()));
    }
    for (auto c : train[r].ones()) ++map.train_counts[c];
  }
  for (std::size_t c = 0; c < map.original_width; ++c) {
    if (map.train_counts[c] >= threshold) map.kept_columns.push_back(c);
  }
  return map;
}

/// Converts a fraction of `rows` to an absolute count, rounding down.
inline std::size_t threshold_from_fraction(double fraction, std::size_t rows) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "threshold fraction must be in (0, 1]");
  }
  return static_cast<std::size_t>(fraction * static_cast<double>(rows));
}

inline FingerprintVector apply_compression(const CompressedFeatureMap& map,
                                           const FingerprintVector& fp) {
  if (fp.width() != map.original_width) {
    throw Error(Errc::WidthMismatch, "apply_compression: width " + std::to_string(fp.width()) +
                                         ", map expects " + std::to_string(map.original_width));
  }
  FingerprintVector out(map.kept_columns.size());
  for (std::size_t j = 0; j < map.kept_columns.size(); ++j) {
    if (fp.test(map.kept_columns[j])) out.set(j);
  }
  return out;
}

inline nlohmann::json to_json(const CompressedFeatureMap& map) {
  return {{"original_width", map.original_width},
          {"threshold", map.threshold},
          {"kept_columns", map.kept_columns},
          {"train_counts", map.train_counts}};
}

inline CompressedFeatureMap feature_map_from_json(const nlohmann::json& j) {
  CompressedFeatureMap map;
  try {
    map.original_width = j.at("original_width").get<std::size_t>();
    map.threshold = j.at("threshold").get<std::size_t>();
    map.kept_columns = j.at("kept_columns").get<std::vector<std::size_t>>();
    map.train_counts = j.at("train_counts").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("feature map: ") + e.what());
  }
  for (std::size_t k = 0; k < map.kept_columns.size(); ++k) {
    if (map.kept_columns[k] >= map.original_width ||
        (k > 0 && map.kept_columns[k] <= map.kept_columns[k - 1])) {
      throw Error(Errc::ConfigInvalid, "feature map: kept_columns must be increasing and in range");
    }
  }
  return map;
}

}  // namespace qscreen
