// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qscreen/bitvec.hpp"
#include "qscreen/error.hpp"
#include "qscreen/importance.hpp"

namespace qscreen {

struct ScreenResult {
  std::vector<std::size_t> kept_indices;
  double ratio = 0.0;
  std::vector<Constraint> constraints;
};

/// Keeps the rows whose bits match every constraint.
inline ScreenResult filter_by_constraints(std::span<const FingerprintVector> fingerprints,
                                          std::span<const Constraint> constraints) {
  ScreenResult result;
  result.constraints.assign(constraints.begin(), constraints.end());
  if (fingerprints.empty()) return result;
  const std::size_t width = fingerprints.front().width();
  for (const auto& c : constraints) {
    if (c.index >= width) {
      throw Error(Errc::IndexOutOfRange, "filter_by_constraints: index " +
                                             std::to_string(c.index) + " outside width " +
                                             std::to_string(width));
    }
  }
  for (std::size_t r = 0; r < fingerprints.size(); ++r) {
    const auto& fp = fingerprints[r];
    if (fp.width() != width) {
      throw Error(Errc::WidthMismatch, "filter_by_constraints: row " + std::to_string(r) +
                                           " has width " + std::to_string(fp.width()));
    }
    bool keep = true;
    for (const auto& c : constraints) {
      if (fp.test(c.index) != c.bit) {
        keep = false;
        break;
      }
    }
    if (keep) result.kept_indices.push_back(r);
  }
  result.ratio = static_cast<double>(result.kept_indices.size()) /
                 static_cast<double>(fingerprints.size());
  return result;
}

struct Novelty {
  std::size_t min_distance = 0;
  std::size_t nearest_row = 0;

  bool novel() const noexcept { return min_distance > 0; }
};

/// Nearest row to x_opt by Hamming distance; lowest index wins ties.
inline Novelty novelty_check(const BitVector& x_opt, std::span<const FingerprintVector> fingerprints) {
  if (fingerprints.empty()) throw Error(Errc::EmptyList, "novelty_check: no rows");
  Novelty best{std::numeric_limits<std::size_t>::max(), 0};
  for (std::size_t r = 0; r < fingerprints.size(); ++r) {
    const auto d = hamming_distance(x_opt, fingerprints[r]);
    if (d < best.min_distance) best = {d, r};
  }
  return best;
}

}  // namespace qscreen
