// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qscreen/annealer.hpp"
#include "qscreen/bitvec.hpp"
#include "qscreen/error.hpp"
#include "qscreen/gbdt.hpp"

namespace qscreen {

inline constexpr std::size_t kDefaultTopK = 20;

/// |p_i - 1/2| where p_i is the multiplicity-weighted frequency of bit i.
inline std::vector<double> frequency_importance(const SampleSet& samples) {
  if (samples.entries.empty()) throw Error(Errc::EmptySampleSet, "frequency_importance: no samples");
  const std::size_t n = samples.entries.front().bits.width();
  std::vector<double> ones(n, 0.0);
  double total = 0.0;
  for (const auto& e : samples.entries) {
    const auto c = static_cast<double>(e.count);
    total += c;
    for (auto i : e.bits.ones()) ones[i] += c;
  }
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = std::abs(ones[i] / total - 0.5);
  return score;
}

/// Marginal frequency of bit = 1 per feature.
inline std::vector<double> bit_frequency(const SampleSet& samples) {
  if (samples.entries.empty()) throw Error(Errc::EmptySampleSet, "bit_frequency: no samples");
  const std::size_t n = samples.entries.front().bits.width();
  std::vector<double> ones(n, 0.0);
  double total = 0.0;
  for (const auto& e : samples.entries) {
    const auto c = static_cast<double>(e.count);
    total += c;
    for (auto i : e.bits.ones()) ones[i] += c;
  }
  for (auto& v : ones) v /= total;
  return ones;
}

/// Indices of the k largest scores, descending; ties go to the lower index.
inline std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1) throw Error(Errc::ConfigInvalid, "select_top_k: k must be >= 1");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

struct Constraint {
  std::size_t index = 0;
  bool bit = false;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Pairs each selected feature with its value in the optimized configuration.
inline std::vector<Constraint> assign_polarity(std::span<const std::size_t> top_k,
                                               const BitVector& x_opt) {
  std::vector<Constraint> out;
  out.reserve(top_k.size());
  for (auto i : top_k) {
    if (i >= x_opt.width()) {
      throw Error(Errc::IndexOutOfRange, "assign_polarity: index " + std::to_string(i) +
                                             " outside width " + std::to_string(x_opt.width()));
    }
    out.push_back({i, x_opt.test(i)});
  }
  return out;
}

enum class ImportanceMetric { Gain, Frequency };

inline ImportanceMetric importance_metric_from_string(std::string_view s) {
  if (s == "gain") return ImportanceMetric::Gain;
  if (s == "frequency") return ImportanceMetric::Frequency;
  throw Error(Errc::ConfigInvalid, "unknown importance metric '" + std::string(s) + "'");
}

struct ImportanceReport {
  std::vector<double> gain;
  std::vector<double> frequency;  // marginal 1-frequency per feature
  std::vector<double> frequency_score;
  ImportanceMetric metric = ImportanceMetric::Gain;
  std::vector<std::size_t> top_k;
  std::vector<Constraint> polarity;
};

/// Gain importance from a boosted model of energy, plus the frequency score
/// side by side; top-k is taken from `metric` and polarized by x_opt.
inline ImportanceReport analyze_importance(const SampleSet& samples, const BitVector& x_opt,
                                           const GbdtConfig& config, std::size_t k,
                                           ImportanceMetric metric = ImportanceMetric::Gain) {
  ImportanceReport report;
  report.gain = fit_gbdt(samples, config).gain;
  report.frequency = bit_frequency(samples);
  report.frequency_score = frequency_importance(samples);
  report.metric = metric;
  report.top_k = select_top_k(metric == ImportanceMetric::Gain ? report.gain : report.frequency_score, k);
  report.polarity = assign_polarity(report.top_k, x_opt);
  return report;
}

inline nlohmann::json to_json(const ImportanceReport& r, const GbdtConfig& config) {
  nlohmann::json polarity = nlohmann::json::array();
  for (const auto& c : r.polarity) polarity.push_back({c.index, c.bit ? 1 : 0});
  nlohmann::json cfg = to_json(config);
  cfg["metric"] = r.metric == ImportanceMetric::Gain ? "gain" : "frequency";
  cfg["k"] = r.top_k.size();
  return {{"gain", r.gain},
          {"frequency", r.frequency},
          {"frequency_score", r.frequency_score},
          {"top_k", r.top_k},
          {"polarity", polarity},
          {"config", cfg}};
}

}  // namespace qscreen
