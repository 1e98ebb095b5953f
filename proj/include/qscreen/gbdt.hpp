// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Least-squares gradient boosting over binary features with exact greedy
// splits. Each split tests one bit: rows with the bit clear go left, rows with
// it set go right. Rows carry weights (sample multiplicities).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qscreen/annealer.hpp"
#include "qscreen/bitvec.hpp"
#include "qscreen/error.hpp"
#include "qscreen/random.hpp"

namespace qscreen {

struct GbdtConfig {
  int num_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 5;  // distinct rows, not weight
  std::uint64_t seed = 0;            // breaks ties between equally good splits

  void validate() const {
    if (num_trees < 1 || max_depth < 1 || min_samples_leaf < 1 ||
        !(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw Error(Errc::ConfigInvalid,
                  "gbdt: need num_trees >= 1, max_depth >= 1, min_samples_leaf >= 1, "
                  "learning_rate in (0, 1]");
    }
  }
};

inline nlohmann::json to_json(const GbdtConfig& c) {
  return {{"num_trees", c.num_trees},
          {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},
          {"min_samples_leaf", c.min_samples_leaf},
          {"seed", c.seed}};
}

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 for a leaf
    double value = 0.0;
    int left = -1;   // bit clear
    int right = -1;  // bit set
  };

  double predict(const BitVector& x) const {
    int k = 0;
    while (nodes_[k].feature >= 0) {
      k = x.test(static_cast<std::size_t>(nodes_[k].feature)) ? nodes_[k].right : nodes_[k].left;
    }
    return nodes_[k].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<Node>& nodes() noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

struct GbdtModel {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  double predict(const BitVector& x) const {
    double p = base;
    for (const auto& t : trees) p += learning_rate * t.predict(x);
    return p;
  }
};

struct GbdtFit {
  GbdtModel model;
  std::vector<double> gain;        // per feature, total weighted-SSE reduction
  std::vector<double> stage_loss;  // weighted MSE after the base and each tree
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const BitVector> rows, std::span<const double> weights,
              const GbdtConfig& config, std::vector<double>& gain)
      : rows_(rows), weights_(weights), config_(config), gain_(gain), rng_(config.seed) {}

  RegressionTree build(const std::vector<double>& residual) {
    residual_ = &residual;
    RegressionTree tree;
    nodes_ = &tree.nodes();
    std::vector<std::size_t> all(rows_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    grow(all, 0);
    return tree;
  }

 private:
  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_->size());
    nodes_->push_back({});
    double sum = 0.0, weight = 0.0, sq = 0.0;
    for (auto r : idx) {
      const double w = weights_[r];
      const double v = (*residual_)[r];
      sum += w * v;
      weight += w;
      sq += w * v * v;
    }
    (*nodes_)[id].value = weight > 0.0 ? sum / weight : 0.0;
    const double node_sse = sq - sum * sum / weight;
    if (depth >= config_.max_depth || idx.size() < 2 * config_.min_samples_leaf ||
        !(node_sse > 1e-12 * sq)) {
      return id;
    }

    const std::size_t n_features = rows_.front().width();
    std::vector<std::pair<int, double>> valid;  // (feature, gain) for splits meeting min_samples_leaf
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < n_features; ++f) {
      double s1 = 0.0, w1 = 0.0;
      std::size_t c1 = 0;
      for (auto r : idx) {
        if (!rows_[r].test(f)) continue;
        s1 += weights_[r] * (*residual_)[r];
        w1 += weights_[r];
        ++c1;
      }
      const std::size_t c0 = idx.size() - c1;
      if (c1 < config_.min_samples_leaf || c0 < config_.min_samples_leaf) continue;
      const double s0 = sum - s1;
      const double w0 = weight - w1;
      if (!(w0 > 0.0 && w1 > 0.0)) continue;
      const double g = s1 * s1 / w1 + s0 * s0 / w0 - sum * sum / weight;
      valid.emplace_back(static_cast<int>(f), g);
      best_gain = std::max(best_gain, g);
    }
    if (valid.empty()) return id;

    // Splits whose gain is within rounding of the best are ties; one is drawn
    // with the tree RNG. A zero-gain split is still taken: on interactions
    // such as XOR no single bit reduces the error until its partner is split.
    const double tol = 1e-12 * node_sse;
    std::vector<int> tied;
    for (const auto& [f, g] : valid) {
      if (g >= best_gain - tol) tied.push_back(f);
    }
    const int best_feature = tied.size() == 1 ? tied.front() : tied[rng_.below(tied.size())];
    best_gain = std::max(0.0, best_gain);

    gain_[static_cast<std::size_t>(best_feature)] += best_gain;
    std::vector<std::size_t> left, right;
    for (auto r : idx) {
      (rows_[r].test(static_cast<std::size_t>(best_feature)) ? right : left).push_back(r);
    }
    (*nodes_)[id].feature = best_feature;
    const int l = grow(left, depth + 1);
    (*nodes_)[id].left = l;
    const int rgt = grow(right, depth + 1);
    (*nodes_)[id].right = rgt;
    return id;
  }

  std::span<const BitVector> rows_;
  std::span<const double> weights_;
  const GbdtConfig& config_;
  std::vector<double>& gain_;
  const std::vector<double>* residual_ = nullptr;
  std::vector<RegressionTree::Node>* nodes_ = nullptr;
  Rng rng_;
};

}  // namespace detail

/// Stagewise least-squares boosting. Starts from the weighted mean target;
/// each tree fits the current residuals with leaf values equal to the
/// weighted mean residual, scaled by the learning rate.
inline GbdtFit fit_gbdt(std::span<const BitVector> rows, std::span<const double> targets,
                        std::span<const double> weights, const GbdtConfig& config) {
  config.validate();
  if (rows.size() != targets.size() || rows.size() != weights.size()) {
    throw Error(Errc::LengthMismatch, "fit_gbdt: rows, targets and weights differ in length");
  }
  if (rows.empty()) throw Error(Errc::EmptySampleSet, "fit_gbdt: no rows");
  const std::size_t width = rows.front().width();
  for (const auto& r : rows) {
    if (r.width() != width) throw Error(Errc::WidthMismatch, "fit_gbdt: rows differ in width");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw Error(Errc::ConfigInvalid, "fit_gbdt: weights must be positive");
  }

  std::unordered_set<BitVector, BitVectorHash> distinct(rows.begin(), rows.end());
  double sum = 0.0, total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sum += weights[i] * targets[i];
    total += weights[i];
  }
  const double mean = sum / total;
  double var = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    var += weights[i] * (targets[i] - mean) * (targets[i] - mean);
  }
  if (distinct.size() < 2 || !(var > 0.0)) {
    throw Error(Errc::DegenerateSamples,
                "fit_gbdt: need at least two distinct configurations and non-constant targets");
  }

  GbdtFit fit;
  fit.model.base = mean;
  fit.model.learning_rate = config.learning_rate;
  fit.gain.assign(width, 0.0);

  std::vector<double> pred(rows.size(), mean);
  std::vector<double> residual(rows.size());
  auto weighted_mse = [&] {
    double l = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      l += weights[i] * (targets[i] - pred[i]) * (targets[i] - pred[i]);
    }
    return l / total;
  };
  fit.stage_loss.push_back(weighted_mse());

  detail::TreeBuilder builder(rows, weights, config, fit.gain);
  for (int t = 0; t < config.num_trees; ++t) {
    for (std::size_t i = 0; i < rows.size(); ++i) residual[i] = targets[i] - pred[i];
    RegressionTree tree = builder.build(residual);
    for (std::size_t i = 0; i < rows.size(); ++i) pred[i] += config.learning_rate * tree.predict(rows[i]);
    fit.model.trees.push_back(std::move(tree));
    fit.stage_loss.push_back(weighted_mse());
  }
  return fit;
}

/// Fits energy as a function of configuration, weighting each distinct
/// configuration by its multiplicity.
inline GbdtFit fit_gbdt(const SampleSet& samples, const GbdtConfig& config) {
  std::vector<BitVector> rows;
  std::vector<double> targets, weights;
  rows.reserve(samples.entries.size());
  for (const auto& e : samples.entries) {
    rows.push_back(e.bits);
    targets.push_back(e.energy);
    weights.push_back(static_cast<double>(e.count));
  }
  return fit_gbdt(rows, targets, weights, config);
}

}  // namespace qscreen
