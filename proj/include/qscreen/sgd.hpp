// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qscreen/dataset.hpp"
#include "qscreen/error.hpp"
#include "qscreen/qubo.hpp"
#include "qscreen/random.hpp"

namespace qscreen {

enum class Penalty { None, L1, L2 };
enum class LearningRate { Constant, InvScaling };

constexpr std::string_view to_string(Penalty p) noexcept {
  switch (p) {
    case Penalty::None: return "none";
    case Penalty::L1: return "l1";
    case Penalty::L2: return "l2";
  }
  return "?";
}

inline Penalty penalty_from_string(std::string_view s) {
  if (s == "none") return Penalty::None;
  if (s == "l1" || s == "L1") return Penalty::L1;
  if (s == "l2" || s == "L2") return Penalty::L2;
  throw Error(Errc::ConfigInvalid, "unknown penalty '" + std::string(s) + "'");
}

/// Per-example objective: 0.5 * (f(x) - y)^2 + alpha * R(w), with
/// R = ||w||_1 (L1) or ||w||_2^2 (L2). Coefficients start at zero.
struct SgdConfig {
  Penalty penalty = Penalty::L2;
  double alpha = 0.1;
  double eta = 0.001;
  int epochs = 160;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;
  LearningRate schedule = LearningRate::Constant;
  double power_t = 0.25;  // inverse scaling: eta_t = eta / t^power_t
  std::size_t max_variables = 1024;
};

/// loss_history[e] is mean 0.5 * (f(x) - y)^2 over the training set at the
/// end of epoch e, penalty excluded.
struct FitReport {
  Penalty penalty = Penalty::L2;
  double alpha = 0.0;
  double eta = 0.0;
  int epochs_run = 0;
  std::vector<double> loss_history;
  std::optional<double> r2_train;
  std::optional<double> r2_test;
};

inline nlohmann::json to_json(const FitReport& r) {
  nlohmann::json j;
  j["penalty"] = std::string(to_string(r.penalty));
  j["alpha"] = r.alpha;
  j["eta"] = r.eta;
  j["epochs"] = r.epochs_run;
  j["loss_history"] = r.loss_history;
  j["r2_train"] = r.r2_train ? nlohmann::json(*r.r2_train) : nlohmann::json(nullptr);
  j["r2_test"] = r.r2_test ? nlohmann::json(*r.r2_test) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

/// r2 on a labeled set, or nullopt when the labels have no variance.
inline std::optional<double> r2_on(const QuboModel& model, const std::vector<LabeledExample>& set) {
  if (set.empty()) return std::nullopt;
  std::vector<double> y, p;
  y.reserve(set.size());
  p.reserve(set.size());
  for (const auto& ex : set) {
    y.push_back(ex.y);
    p.push_back(predict(model, ex.features));
  }
  try {
    return r2_score(y, p);
  } catch (const Error& e) {
    if (e.code() == Errc::ZeroVariance) return std::nullopt;
    throw;
  }
}

}  // namespace detail

/// Fits the quadratic surrogate by per-example SGD over the linearized
/// features X_ij = x_i x_j. The expansion is never materialized; each step
/// touches only the pairs of set bits of one example.
///
/// L2 uses a global weight scale so the shrink step (1 - 2 eta alpha) costs
/// O(1). L1 uses cumulative-penalty clipping: a coefficient is pulled toward
/// zero by the penalty accumulated since its last update but never crosses
/// it, so the subgradient at zero is zero. All coefficients are caught up at
/// every epoch end.
inline std::pair<QuboModel, FitReport> sgd_fit(const std::vector<LabeledExample>& train,
                                               const SgdConfig& config,
                                               const std::vector<LabeledExample>& test = {}) {
  if (train.empty()) throw Error(Errc::EmptyTrainSet, "sgd_fit: empty training set");
  if (!(config.alpha >= 0.0) || !(config.eta > 0.0) || config.epochs < 1) {
    throw Error(Errc::ConfigInvalid, "sgd_fit: need alpha >= 0, eta > 0, epochs >= 1");
  }
  const std::size_t n = train.front().features.width();
  if (n > config.max_variables) {
    throw Error(Errc::DimensionCapExceeded, "sgd_fit: " + std::to_string(n) +
                                                " variables exceeds cap " +
                                                std::to_string(config.max_variables));
  }
  for (const auto* set : {&train, &test}) {
    for (const auto& ex : *set) {
      if (ex.features.width() != n) {
        throw Error(Errc::WidthMismatch, "sgd_fit: example width " +
                                             std::to_string(ex.features.width()) + ", expected " +
                                             std::to_string(n));
      }
    }
  }
  if (config.penalty == Penalty::L2 && !(1.0 - 2.0 * config.eta * config.alpha > 0.0)) {
    throw Error(Errc::ConfigInvalid, "sgd_fit: L2 shrink factor 1 - 2*eta*alpha must be positive");
  }

  QuboModel shape(n);
  const std::size_t n_features = shape.feature_count();
  std::vector<std::vector<std::uint32_t>> active(train.size());
  for (std::size_t e = 0; e < train.size(); ++e) active[e] = train[e].features.ones();

  std::vector<std::size_t> row_offset(n);
  for (std::size_t i = 0; i < n; ++i) row_offset[i] = n + i * (2 * n - i - 1) / 2 - i - 1;

  // True weight = scale * v[f].
  std::vector<double> v(n_features, 0.0);
  double scale = 1.0;
  // L1 bookkeeping.
  double u = 0.0;
  std::vector<double> q(config.penalty == Penalty::L1 ? n_features : 0, 0.0);

  auto for_each_feature = [&](const std::vector<std::uint32_t>& on, auto&& fn) {
    for (std::size_t a = 0; a < on.size(); ++a) {
      fn(static_cast<std::size_t>(on[a]));
      const std::size_t base = row_offset[on[a]];
      for (std::size_t b = a + 1; b < on.size(); ++b) fn(base + on[b]);
    }
  };

  auto clip_l1 = [&](std::size_t f) {
    const double z = v[f];
    if (z > 0.0) {
      v[f] = std::max(0.0, z - (u + q[f]));
    } else if (z < 0.0) {
      v[f] = std::min(0.0, z + (u - q[f]));
    }
    q[f] += v[f] - z;
  };

  auto materialize = [&]() {
    QuboModel model(n);
    auto lin = model.linear_terms();
    auto quad = model.quadratic_terms();
    for (std::size_t i = 0; i < n; ++i) lin[i] = scale * v[i];
    for (std::size_t k = 0; k < quad.size(); ++k) quad[k] = scale * v[n + k];
    return model;
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);

  FitReport report;
  report.penalty = config.penalty;
  report.alpha = config.alpha;
  report.eta = config.eta;

  std::uint64_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) rng.shuffle(order.begin(), order.end());
    for (std::size_t idx : order) {
      ++t;
      const double eta = config.schedule == LearningRate::Constant
                             ? config.eta
                             : config.eta / std::pow(static_cast<double>(t), config.power_t);
      const auto& on = active[idx];
      double pred = 0.0;
      for_each_feature(on, [&](std::size_t f) { pred += v[f]; });
      pred *= scale;
      const double residual = pred - train[idx].y;

      if (config.penalty == Penalty::L2) {
        scale *= 1.0 - 2.0 * eta * config.alpha;
      }
      const double step = eta * residual / scale;
      for_each_feature(on, [&](std::size_t f) { v[f] -= step; });

      if (config.penalty == Penalty::L1) {
        u += eta * config.alpha;
        for_each_feature(on, clip_l1);
      }
      if (scale < 1e-9) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
    }
    if (config.penalty == Penalty::L1) {
      for (std::size_t f = 0; f < n_features; ++f) clip_l1(f);
    }

    const QuboModel model = materialize();
    double loss = 0.0;
    for (const auto& ex : train) {
      const double r = predict(model, ex.features) - ex.y;
      loss += 0.5 * r * r;
    }
    loss /= static_cast<double>(train.size());
    if (!std::isfinite(loss)) {
      throw Error(Errc::NonFiniteLossDiverged,
                  "sgd_fit: loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    report.loss_history.push_back(loss);
    ++report.epochs_run;
  }

  QuboModel model = materialize();
  report.r2_train = detail::r2_on(model, train);
  report.r2_test = detail::r2_on(model, test);
  return {std::move(model), std::move(report)};
}

}  // namespace qscreen
