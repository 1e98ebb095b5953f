// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qscreen/bitvec.hpp"
#include "qscreen/dataset.hpp"
#include "qscreen/error.hpp"
#include "qscreen/format.hpp"
#include "qscreen/parallel.hpp"
#include "qscreen/qubo.hpp"
#include "qscreen/random.hpp"

namespace qscreen {

/// QUBO energy by a dense scan over all variable pairs. Deliberately a
/// different code path from predict(), which iterates over set bits only.
inline double energy(const QuboModel& model, const BitVector& x) {
  const std::size_t n = model.size();
  if (x.width() != n) {
    throw Error(Errc::WidthMismatch, "energy: width " + std::to_string(x.width()) +
                                         ", model has " + std::to_string(n));
  }
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!x.test(i)) continue;
    double field = model.linear(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (x.test(j)) field += model.quadratic(i, j);
    }
    e += field;
  }
  return e;
}

/// Ising form over s in {-1, +1}:
///   E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i + offset.
struct IsingModel {
  std::size_t n = 0;
  std::vector<double> h;
  std::vector<double> coupling;  // packed strict upper triangle, QuboModel layout
  double offset = 0.0;

  double J(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return coupling[i * (2 * n - i - 1) / 2 + (j - i - 1)];
  }
};

/// Substitutes x_i = (1 + s_i) / 2.
inline IsingModel qubo_to_ising(const QuboModel& model) {
  IsingModel ising;
  const std::size_t n = model.size();
  ising.n = n;
  ising.h.assign(n, 0.0);
  ising.coupling.assign(model.quadratic_terms().size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    ising.h[i] += model.linear(i) / 2.0;
    ising.offset += model.linear(i) / 2.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double q = model.quadratic(i, j);
      ising.coupling[model.pair_index(i, j)] = q / 4.0;
      ising.h[i] += q / 4.0;
      ising.h[j] += q / 4.0;
      ising.offset += q / 4.0;
    }
  }
  return ising;
}

inline double ising_energy(const IsingModel& ising, std::span<const int> spins) {
  if (spins.size() != ising.n) throw Error(Errc::WidthMismatch, "ising_energy: width mismatch");
  double e = ising.offset;
  for (std::size_t i = 0; i < ising.n; ++i) {
    e += ising.h[i] * spins[i];
    for (std::size_t j = i + 1; j < ising.n; ++j) e += ising.J(i, j) * spins[i] * spins[j];
  }
  return e;
}

inline std::vector<int> to_spins(const BitVector& x) {
  std::vector<int> s(x.width());
  for (std::size_t i = 0; i < x.width(); ++i) s[i] = x.test(i) ? 1 : -1;
  return s;
}

// ---------------------------------------------------------------------------
// Sample sets

struct SampleEntry {
  BitVector bits;
  double energy = 0.0;
  std::uint64_t count = 0;

  friend bool operator==(const SampleEntry&, const SampleEntry&) = default;
};

/// Distinct configurations with multiplicities, sorted by energy and then by
/// configuration (big-endian), so the first entry is the best.
struct SampleSet {
  std::vector<SampleEntry> entries;
  std::uint64_t total_reads = 0;
  std::uint64_t seed = 0;

  const SampleEntry& best() const {
    if (entries.empty()) throw Error(Errc::EmptySampleSet, "sample set is empty");
    return entries.front();
  }

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

/// Aggregates raw configurations; energies are evaluated once per distinct
/// configuration with energy().
inline SampleSet aggregate_samples(const QuboModel& model, const std::vector<BitVector>& configs,
                                   std::uint64_t seed) {
  std::unordered_map<BitVector, std::uint64_t, BitVectorHash> counts;
  for (const auto& c : configs) ++counts[c];
  SampleSet set;
  set.seed = seed;
  set.total_reads = configs.size();
  set.entries.reserve(counts.size());
  for (auto& [bits, count] : counts) set.entries.push_back({bits, energy(model, bits), count});
  std::sort(set.entries.begin(), set.entries.end(), [](const SampleEntry& a, const SampleEntry& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.bits < b.bits;
  });
  return set;
}

/// Re-evaluates every entry under `model` and restores the sort order. Used
/// when sampling ran on a rescaled copy of the model.
inline SampleSet rescore_samples(const QuboModel& model, SampleSet set) {
  for (auto& e : set.entries) e.energy = energy(model, e.bits);
  std::sort(set.entries.begin(), set.entries.end(), [](const SampleEntry& a, const SampleEntry& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.bits < b.bits;
  });
  return set;
}

/// Largest coefficient magnitude; 0 for an all-zero model.
inline double max_abs_coefficient(const QuboModel& model) {
  double m = 0.0;
  for (double v : model.linear_terms()) m = std::max(m, std::abs(v));
  for (double v : model.quadratic_terms()) m = std::max(m, std::abs(v));
  return m;
}

inline QuboModel scaled(QuboModel model, double factor) {
  for (auto& v : model.linear_terms()) v *= factor;
  for (auto& v : model.quadratic_terms()) v *= factor;
  return model;
}

/// CSV with header `bitstring,energy,count`; bit 0 is the leftmost character.
inline void write_samples(std::ostream& out, const SampleSet& set) {
  out << "bitstring,energy,count\n";
  for (const auto& e : set.entries) {
    out << e.bits.to_string() << ',' << format_double(e.energy) << ',' << e.count << '\n';
  }
}

inline SampleSet read_samples(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "sample file is empty");
  if (detail::trim(line) != "bitstring,energy,count") {
    throw Error(Errc::MissingColumn, "sample file header must be 'bitstring,energy,count'", 1);
  }
  SampleSet set;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto f = detail::split_csv_line(detail::trim(line));
    if (f.size() != 3) throw Error(Errc::MalformedNumber, "sample row " + std::to_string(row), row);
    const auto e = detail::parse_double(f[1]);
    std::uint64_t count = 0;
    const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), count);
    if (!e || ec != std::errc{} || ptr != f[2].data() + f[2].size() || count == 0) {
      throw Error(Errc::MalformedNumber, "sample row " + std::to_string(row), row);
    }
    SampleEntry entry{BitVector::from_string(f[0]), *e, count};
    if (!set.entries.empty() && entry.bits.width() != set.entries.front().bits.width()) {
      throw Error(Errc::InconsistentWidth, "sample row " + std::to_string(row), row);
    }
    set.total_reads += count;
    set.entries.push_back(std::move(entry));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Simulated quantum annealing (path-integral Monte Carlo, Suzuki-Trotter)

enum class Interpolation { Linear, Geometric };

struct SqaSchedule {
  std::size_t trotter_slices = 16;
  double beta = 10.0;
  double gamma_start = 3.0;
  double gamma_end = 0.01;
  std::size_t sweeps = 500;
  Interpolation interpolation = Interpolation::Linear;

  void validate() const {
    if (trotter_slices < 1 || sweeps < 1) {
      throw Error(Errc::InvalidSchedule, "schedule needs trotter_slices >= 1 and sweeps >= 1");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(Errc::InvalidSchedule, "schedule needs beta > 0");
    if (!(gamma_end >= 0.0) || gamma_end > gamma_start) {
      throw Error(Errc::InvalidSchedule, "schedule needs 0 <= gamma_end <= gamma_start");
    }
    if (trotter_slices > 1 && !(gamma_end > 0.0)) {
      throw Error(Errc::InvalidSchedule,
                  "tanh(beta * gamma / M) must be positive: gamma_end must be > 0 when M > 1");
    }
    if (interpolation == Interpolation::Geometric && !(gamma_end > 0.0)) {
      throw Error(Errc::InvalidSchedule, "geometric interpolation needs gamma_end > 0");
    }
  }

  /// Transverse field at sweep t in [0, sweeps).
  double gamma(std::size_t t) const {
    const double frac = sweeps == 1 ? 1.0 : static_cast<double>(t) / static_cast<double>(sweeps - 1);
    if (interpolation == Interpolation::Linear) return gamma_start + (gamma_end - gamma_start) * frac;
    return gamma_start * std::pow(gamma_end / gamma_start, frac);
  }

  /// Inter-slice coupling -(1 / (2 beta)) ln tanh(beta * gamma / M); zero for M = 1.
  double j_perp(double gamma_value) const {
    if (trotter_slices == 1) return 0.0;
    return -std::log(std::tanh(beta * gamma_value / static_cast<double>(trotter_slices))) /
           (2.0 * beta);
  }
};

namespace detail {

/// Dense symmetric matrix with zero diagonal, row-major.
inline std::vector<double> dense_couplings(const QuboModel& model, double factor) {
  const std::size_t n = model.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = factor * model.quadratic(i, j);
      m[i * n + j] = v;
      m[j * n + i] = v;
    }
  }
  return m;
}

inline bool metropolis_accept(double beta_delta, Rng& rng) {
  if (beta_delta <= 0.0) return true;
  if (beta_delta > 60.0) return false;
  return rng.uniform() < std::exp(-beta_delta);
}

/// One SQA read. Returns the best of the M slices under energy().
///
/// Replicas s^1..s^M are sampled from exp(-beta * H_eff) with
///   H_eff = (1/M) sum_k E_ising(s^k) - J_perp sum_k sum_i s_i^k s_i^{k+1},
/// periodic in k. Each sweep visits every (slice, spin) pair once in order.
inline BitVector sqa_read(const QuboModel& model, const IsingModel& ising,
                          const std::vector<double>& J, const SqaSchedule& schedule,
                          std::uint64_t seed) {
  const std::size_t n = model.size();
  const std::size_t M = schedule.trotter_slices;
  Rng rng(seed);

  std::vector<double> s(M * n);
  for (auto& v : s) v = rng.coin() ? 1.0 : -1.0;

  std::vector<double> field(M * n);
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double f = ising.h[i];
      const double* row = &J[i * n];
      for (std::size_t j = 0; j < n; ++j) f += row[j] * s[k * n + j];
      field[k * n + i] = f;
    }
  }

  // beta * dH_eff for flipping s_i^k is
  //   s_i^k * (intra * field_i^k + inter * (s_i^{k-1} + s_i^{k+1})).
  const double intra = -2.0 * schedule.beta / static_cast<double>(M);
  for (std::size_t t = 0; t < schedule.sweeps; ++t) {
    const double inter = M > 1 ? 2.0 * schedule.beta * schedule.j_perp(schedule.gamma(t)) : 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      double* slice = &s[k * n];
      double* fk = &field[k * n];
      const double* prev = &s[(k == 0 ? M - 1 : k - 1) * n];
      const double* next = &s[(k + 1 == M ? 0 : k + 1) * n];
      for (std::size_t i = 0; i < n; ++i) {
        const double si = slice[i];
        const double bd = si * (intra * fk[i] + inter * (prev[i] + next[i]));
        if (!metropolis_accept(bd, rng)) continue;
        slice[i] = -si;
        const double d = -2.0 * si;
        const double* row = &J[i * n];
        for (std::size_t j = 0; j < n; ++j) fk[j] += row[j] * d;
      }
    }
  }

  BitVector best;
  double best_energy = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < M; ++k) {
    BitVector x(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (s[k * n + i] > 0.0) x.set(i);
    }
    const double e = energy(model, x);
    if (e < best_energy) {
      best_energy = e;
      best = std::move(x);
    }
  }
  return best;
}

}  // namespace detail

/// Runs `num_reads` independent SQA reads. Read r uses the PRNG stream
/// derive_seed(seed, r); reads may run in parallel, results are merged in
/// read order so the SampleSet does not depend on thread count.
inline SampleSet sqa_optimize(const QuboModel& model, const SqaSchedule& schedule,
                              std::size_t num_reads, std::uint64_t seed, unsigned threads = 0) {
  schedule.validate();
  if (num_reads < 1) throw Error(Errc::ConfigInvalid, "sqa_optimize: num_reads must be >= 1");
  if (model.size() < 1) throw Error(Errc::ConfigInvalid, "sqa_optimize: empty model");
  const IsingModel ising = qubo_to_ising(model);
  const auto J = detail::dense_couplings(model, 0.25);
  std::vector<BitVector> reads(num_reads);
  parallel_for(
      num_reads,
      [&](std::size_t r) { reads[r] = detail::sqa_read(model, ising, J, schedule, derive_seed(seed, r)); },
      threads);
  return aggregate_samples(model, reads, seed);
}

/// Fixed-temperature single-spin-flip Metropolis chain on the QUBO. After
/// `burn_in` sweeps, one configuration is recorded every `sweeps` sweeps.
inline SampleSet sa_sample(const QuboModel& model, double beta, std::size_t sweeps,
                           std::size_t num_samples, std::size_t burn_in, std::uint64_t seed) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(Errc::InvalidBeta, "sa_sample: beta must be positive and finite");
  }
  if (sweeps < 1 || num_samples < 1) {
    throw Error(Errc::ConfigInvalid, "sa_sample: sweeps and num_samples must be >= 1");
  }
  const std::size_t n = model.size();
  const auto Q = detail::dense_couplings(model, 1.0);
  Rng rng(seed);

  std::vector<std::uint8_t> x(n);
  for (auto& v : x) v = rng.coin() ? 1 : 0;
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = model.linear(i);
    for (std::size_t j = 0; j < n; ++j) f += Q[i * n + j] * x[j];
    field[i] = f;
  }

  auto sweep = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = x[i] ? -1.0 : 1.0;
      if (!detail::metropolis_accept(beta * sign * field[i], rng)) continue;
      x[i] ^= 1u;
      const double* row = &Q[i * n];
      for (std::size_t j = 0; j < n; ++j) field[j] += row[j] * sign;
    }
  };

  for (std::size_t b = 0; b < burn_in; ++b) sweep();
  std::vector<BitVector> samples;
  samples.reserve(num_samples);
  while (samples.size() < num_samples) {
    for (std::size_t t = 0; t < sweeps; ++t) sweep();
    BitVector bits(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i]) bits.set(i);
    }
    samples.push_back(std::move(bits));
  }
  return aggregate_samples(model, samples, seed);
}

inline constexpr std::size_t kBruteForceMaxVariables = 24;

struct GroundState {
  BitVector bits;
  double energy = 0.0;
};

/// Exact minimum by Gray-code enumeration. Energies within a relative 1e-12
/// of the minimum count as ties, resolved toward the smallest configuration
/// read as a big-endian integer (bit 0 most significant).
inline GroundState brute_force_min(const QuboModel& model) {
  const std::size_t n = model.size();
  if (n > kBruteForceMaxVariables) {
    throw Error(Errc::TooLarge, "brute_force_min: " + std::to_string(n) + " variables exceeds " +
                                    std::to_string(kBruteForceMaxVariables));
  }
  if (n == 0) return {BitVector(0), 0.0};
  const auto Q = detail::dense_couplings(model, 1.0);
  double scale = 1.0;
  for (double v : model.linear_terms()) scale += std::abs(v);
  for (double v : model.quadratic_terms()) scale += std::abs(v);
  const double tol = 1e-12 * scale;

  // Integer bit b holds variable n-1-b, so integer order is big-endian order.
  std::vector<std::uint8_t> x(n, 0);
  std::vector<double> field(model.linear_terms().begin(), model.linear_terms().end());
  double e = 0.0;
  double best_e = 0.0;
  std::uint64_t best_code = 0;
  std::uint64_t code = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < total; ++k) {
    const auto b = static_cast<std::size_t>(std::countr_zero(k));
    const std::size_t i = n - 1 - b;
    const double sign = x[i] ? -1.0 : 1.0;
    e += sign * field[i];
    x[i] ^= 1u;
    code ^= std::uint64_t{1} << b;
    const double* row = &Q[i * n];
    for (std::size_t j = 0; j < n; ++j) field[j] += row[j] * sign;
    if (e < best_e - tol) {
      best_e = e;
      best_code = code;
    } else if (e <= best_e + tol && code < best_code) {
      best_e = std::min(best_e, e);
      best_code = code;
    }
  }
  BitVector bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    if ((best_code >> (n - 1 - i)) & 1u) bits.set(i);
  }
  return {bits, energy(model, bits)};
}

/// |reported - energy(model, x)| / |reported|.
inline double consistency_delta(const QuboModel& model, double reported, const BitVector& x) {
  if (reported == 0.0) {
    throw Error(Errc::ZeroDenominator,
                "consistency_delta: reported energy is zero; use consistency_abs");
  }
  return std::abs(reported - energy(model, x)) / std::abs(reported);
}

inline double consistency_abs(const QuboModel& model, double reported, const BitVector& x) {
  return std::abs(reported - energy(model, x));
}

/// Largest consistency error over a sample set: relative where the reported
/// energy is nonzero, absolute otherwise.
inline double max_consistency_delta(const QuboModel& model, const SampleSet& set) {
  double worst = 0.0;
  for (const auto& e : set.entries) {
    const double d = e.energy == 0.0 ? consistency_abs(model, e.energy, e.bits)
                                     : consistency_delta(model, e.energy, e.bits);
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace qscreen
