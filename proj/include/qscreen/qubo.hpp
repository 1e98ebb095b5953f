// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qscreen/bitvec.hpp"
#include "qscreen/dataset.hpp"
#include "qscreen/error.hpp"
#include "qscreen/format.hpp"

namespace qscreen {

/// Quadratic model over binary variables:
///   f(x) = sum_{i<j} Q_ij x_i x_j + sum_i h_i x_i.
/// The diagonal h_i plays the role of Q_ii. Off-diagonal terms are stored as
/// a packed strict upper triangle.
class QuboModel {
 public:
  QuboModel() = default;
  explicit QuboModel(std::size_t n) : n_(n), linear_(n, 0.0), quadratic_(n * (n - (n > 0)) / 2, 0.0) {}

  std::size_t size() const noexcept { return n_; }

  double& linear(std::size_t i) { return linear_[i]; }
  double linear(std::size_t i) const { return linear_[i]; }

  /// Q_ij for i != j (symmetric access).
  double& quadratic(std::size_t i, std::size_t j) { return quadratic_[pair_index(i, j)]; }
  double quadratic(std::size_t i, std::size_t j) const { return quadratic_[pair_index(i, j)]; }

  std::span<const double> linear_terms() const noexcept { return linear_; }
  std::span<const double> quadratic_terms() const noexcept { return quadratic_; }
  std::span<double> linear_terms() noexcept { return linear_; }
  std::span<double> quadratic_terms() noexcept { return quadratic_; }

  /// Position of pair (i, j), i != j, in the packed upper triangle.
  std::size_t pair_index(std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  /// Number of linearized features: n diagonal plus n(n-1)/2 pairs.
  std::size_t feature_count() const noexcept { return n_ + quadratic_.size(); }

  /// Coefficients laid out in linearized-feature order (diagonal, then pairs).
  std::vector<double> coefficients() const {
    std::vector<double> w(linear_);
    w.insert(w.end(), quadratic_.begin(), quadratic_.end());
    return w;
  }

  bool all_finite() const noexcept {
    for (double v : linear_) if (!std::isfinite(v)) return false;
    for (double v : quadratic_) if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const QuboModel&, const QuboModel&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> linear_;
  std::vector<double> quadratic_;
};

/// Active features of x under X_ij = x_i x_j, as indices into the layout of
/// QuboModel::coefficients(): i for the diagonal term of variable i,
/// n + pair_index(i, j) for the pair term. Ascending order.
inline std::vector<std::size_t> expand_quadratic(const BitVector& x, std::size_t n) {
  if (x.width() != n) {
    throw Error(Errc::WidthMismatch, "expand_quadratic: width " + std::to_string(x.width()) +
                                         ", expected " + std::to_string(n));
  }
  const auto on = x.ones();
  std::vector<std::size_t> out(on.begin(), on.end());
  out.reserve(on.size() + on.size() * (on.size() - (on.empty() ? 0 : 1)) / 2);
  for (std::size_t a = 0; a < on.size(); ++a) {
    const std::size_t i = on[a];
    const std::size_t row = n + i * (2 * n - i - 1) / 2;
    for (std::size_t b = a + 1; b < on.size(); ++b) out.push_back(row + (on[b] - i - 1));
  }
  return out;
}

/// f_pred(x), summing only over set bits.
inline double predict(const QuboModel& model, const BitVector& x) {
  if (x.width() != model.size()) {
    throw Error(Errc::WidthMismatch, "predict: width " + std::to_string(x.width()) +
                                         ", model has " + std::to_string(model.size()));
  }
  const auto on = x.ones();
  double sum = 0.0;
  for (std::size_t a = 0; a < on.size(); ++a) {
    sum += model.linear(on[a]);
    for (std::size_t b = a + 1; b < on.size(); ++b) sum += model.quadratic(on[a], on[b]);
  }
  return sum;
}

/// Coefficient of determination 1 - SS_res / SS_tot.
inline double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw Error(Errc::LengthMismatch, "r2_score: lengths " + std::to_string(y_true.size()) +
                                          " and " + std::to_string(y_pred.size()));
  }
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) throw Error(Errc::ZeroVariance, "r2_score: y_true has zero variance");
  return 1.0 - ss_res / ss_tot;
}

// QUBO text format, LF terminated:
//   n <N>
//   i j value      one line per nonzero coefficient, 0 <= i <= j < N,
//                  sorted by (i, j); the diagonal carries h_i.
// Values are printed as the shortest decimal that round-trips.

inline void write_qubo(std::ostream& out, const QuboModel& model) {
  const std::size_t n = model.size();
  out << "n " << n << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    if (model.linear(i) != 0.0) out << i << ' ' << i << ' ' << format_double(model.linear(i)) << '\n';
    for (std::size_t j = i + 1; j < n; ++j) {
      const double q = model.quadratic(i, j);
      if (q != 0.0) out << i << ' ' << j << ' ' << format_double(q) << '\n';
    }
  }
}

inline QuboModel read_qubo(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "QUBO file is empty");
  std::istringstream header(line);
  std::string tag;
  long long n = -1;
  if (!(header >> tag >> n) || tag != "n" || n < 1) {
    throw Error(Errc::MalformedNumber, "QUBO header must be 'n <N>' with N >= 1", line_no);
  }
  QuboModel model(static_cast<std::size_t>(n));
  std::vector<bool> seen_diag(model.size(), false);
  std::vector<bool> seen_pair(model.quadratic_terms().size(), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long i = -1, j = -1;
    std::string value_text;
    if (!(fields >> i >> j >> value_text) || i < 0 || j < i || j >= n) {
      throw Error(Errc::MalformedNumber, "QUBO line " + std::to_string(line_no) + " malformed", line_no);
    }
    const auto value = detail::parse_double(value_text);
    if (!value) {
      throw Error(Errc::MalformedNumber, "QUBO line " + std::to_string(line_no) + ": bad value", line_no);
    }
    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    if (ui == uj) {
      if (seen_diag[ui]) throw Error(Errc::MalformedNumber, "QUBO duplicate entry", line_no);
      seen_diag[ui] = true;
      model.linear(ui) = *value;
    } else {
      const auto k = model.pair_index(ui, uj);
      if (seen_pair[k]) throw Error(Errc::MalformedNumber, "QUBO duplicate entry", line_no);
      seen_pair[k] = true;
      model.quadratic(ui, uj) = *value;
    }
  }
  return model;
}

inline void export_qubo(const QuboModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  write_qubo(out, model);
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline QuboModel import_qubo(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_qubo(in);
}

}  // namespace qscreen
