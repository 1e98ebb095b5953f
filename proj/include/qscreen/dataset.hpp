// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qscreen/bitvec.hpp"
#include "qscreen/error.hpp"
#include "qscreen/random.hpp"

namespace qscreen {

/// Target gap used when none is configured (eV).
inline constexpr double kDefaultTargetGap = 0.32;

struct Record {
  std::string smiles;
  double gap = 0.0;  // eV, as ingested

  friend bool operator==(const Record&, const Record&) = default;
};

struct LabeledExample {
  FingerprintVector features;
  double y = 0.0;  // squared distance from the target gap
};

/// Squared distance of a gap from the target gap.
constexpr double cost(double gap, double target = kDefaultTargetGap) noexcept {
  const double d = gap - target;
  return d * d;
}

namespace detail {

/// Splits one CSV line. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Strict decimal parse: the whole field must be a finite number.
inline std::optional<double> parse_double(std::string_view s) noexcept {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace detail

/// Reads a headed CSV. Data rows are numbered from 1 in error locations.
inline std::vector<Record> read_csv_records(std::istream& in, std::string_view smiles_column,
                                            std::string_view gap_column) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "CSV input is empty");
  const auto header = detail::split_csv_line(line);
  std::size_t smiles_idx = header.size();
  std::size_t gap_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = detail::trim(header[i]);
    if (name == smiles_column) smiles_idx = i;
    if (name == gap_column) gap_idx = i;
  }
  if (smiles_idx == header.size()) {
    throw Error(Errc::MissingColumn, "CSV has no column '" + std::string(smiles_column) + "'");
  }
  if (gap_idx == header.size()) {
    throw Error(Errc::MissingColumn, "CSV has no column '" + std::string(gap_column) + "'");
  }

  std::vector<Record> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= std::max(smiles_idx, gap_idx)) {
      throw Error(Errc::MalformedNumber, "row " + std::to_string(row) + ": too few fields", row);
    }
    const auto gap = detail::parse_double(fields[gap_idx]);
    if (!gap) {
      throw Error(Errc::MalformedNumber,
                  "row " + std::to_string(row) + ": cannot parse gap '" + fields[gap_idx] + "'",
                  row);
    }
    records.push_back({std::string(detail::trim(fields[smiles_idx])), *gap});
  }
  return records;
}

inline std::vector<Record> ingest_csv(const std::filesystem::path& path,
                                      std::string_view smiles_column = "smiles",
                                      std::string_view gap_column = "gap") {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_csv_records(in, smiles_column, gap_column);
}

struct SplitConfig {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded Fisher-Yates shuffle of 0..n-1; the first floor(n * fraction) go
/// to train. A 1e-9 slack absorbs representation error in the product.
inline SplitIndices split_indices(std::size_t n, const SplitConfig& config) {
  if (n == 0) throw Error(Errc::EmptyList, "split: empty list");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw Error(Errc::ConfigInvalid, "split: train_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.train_fraction + 1e-9));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& items,
                                                const SplitConfig& config) {
  const auto idx = split_indices(items.size(), config);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(idx.train.size());
  out.second.reserve(idx.test.size());
  for (auto i : idx.train) out.first.push_back(items[i]);
  for (auto i : idx.test) out.second.push_back(items[i]);
  return out;
}

}  // namespace qscreen
