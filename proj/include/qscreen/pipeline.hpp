// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Stage orchestration for the screening pipeline. Every stage reads its
// inputs from the output directory, writes its artifacts there and records
// their SHA-256 digests in manifest.json. Stages are independent processes in
// the sense that nothing is carried in memory between them, so any stage can
// be rerun from its upstream files alone.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qscreen/annealer.hpp"
#include "qscreen/dataset.hpp"
#include "qscreen/digest.hpp"
#include "qscreen/error.hpp"
#include "qscreen/fingerprint.hpp"
#include "qscreen/format.hpp"
#include "qscreen/gbdt.hpp"
#include "qscreen/importance.hpp"
#include "qscreen/parallel.hpp"
#include "qscreen/qubo.hpp"
#include "qscreen/random.hpp"
#include "qscreen/screening.hpp"
#include "qscreen/sgd.hpp"
#include "qscreen/smiles.hpp"

namespace qscreen {

inline constexpr std::string_view kOutputDirEnv = "QSCREEN_OUTPUT_DIR";
inline constexpr double kConsistencyTolerance = 1e-12;

enum class Stage { Ingest, Featurize, Train, Anneal, Sample, Importance, Screen, Report };

inline constexpr Stage kAllStages[] = {Stage::Ingest, Stage::Featurize,  Stage::Train,
                                       Stage::Anneal, Stage::Sample,     Stage::Importance,
                                       Stage::Screen, Stage::Report};

constexpr std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Featurize: return "featurize";
    case Stage::Train: return "train";
    case Stage::Anneal: return "anneal";
    case Stage::Sample: return "sample";
    case Stage::Importance: return "importance";
    case Stage::Screen: return "screen";
    case Stage::Report: return "report";
  }
  return "unknown";
}

enum class SamplerKind { Metropolis, Sqa };
enum class ScreenSplit { Train, Test, All };

/// Everything a run needs. Defaults follow the reference setup: 512-bit
/// radius-2 fingerprints, compression threshold 15000, a 9:1 split, L2 SGD
/// with alpha 0.1 and eta 0.001 for 160 epochs, 16-slice SQA with 500
/// sweeps, top 20 features by gain.
struct RunConfig {
  std::filesystem::path input;
  std::string smiles_column = "smiles";
  std::string gap_column = "gap";
  double target_gap = kDefaultTargetGap;

  std::optional<std::filesystem::path> precomputed_fingerprints;
  int radius = kDefaultRadius;
  std::size_t nbits = kDefaultFingerprintBits;

  // Exactly one of these is in effect; a fraction is converted against the
  // train row count, rounding down.
  std::size_t threshold_count = 15000;
  std::optional<double> threshold_fraction;

  double train_fraction = 0.9;
  std::uint64_t seed = 42;

  SgdConfig sgd;
  SqaSchedule schedule;
  std::size_t reads = 100;

  SamplerKind sampler = SamplerKind::Metropolis;
  double sample_beta = 5.0;
  std::size_t num_samples = 1000;
  std::size_t burn_in = 100;
  std::size_t thin = 10;

  // Anneal and sample on a copy scaled to max |coefficient| = 1, so beta is
  // in units of the largest coefficient. Reported energies are always
  // recomputed on the unscaled model.
  bool normalize_energy = true;

  GbdtConfig gbdt;
  std::size_t k = kDefaultTopK;
  ImportanceMetric metric = ImportanceMetric::Gain;

  ScreenSplit screen_split = ScreenSplit::Train;

  std::filesystem::path output_dir = "qscreen_out";
};

/// Per-stage seeds: derive_seed(root, stage tag).
inline std::uint64_t stage_seed(const RunConfig& c, std::string_view tag) {
  return derive_seed(c.seed, tag);
}

// ---------------------------------------------------------------------------
// Config file

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) {
  throw Error(Errc::ConfigInvalid, "config: " + what);
}

template <class T>
T get_as(const nlohmann::json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error("key '" + std::string(key) + "' has the wrong type");
  }
}

/// Walks an object and hands every key to `fn`; unknown keys are errors so a
/// typo never silently falls back to a default.
inline void for_each_key(const nlohmann::json& obj, std::string_view where,
                         const std::function<bool(const std::string&, const nlohmann::json&)>& fn) {
  if (!obj.is_object()) config_error("'" + std::string(where) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!fn(key, value)) config_error("unknown key '" + std::string(where) + "." + key + "'");
  }
}

inline std::string sampler_name(SamplerKind k) { return k == SamplerKind::Sqa ? "sqa" : "sa"; }

inline std::string split_name(ScreenSplit s) {
  switch (s) {
    case ScreenSplit::Train: return "train";
    case ScreenSplit::Test: return "test";
    case ScreenSplit::All: return "all";
  }
  return "train";
}

}  // namespace detail

inline SamplerKind sampler_from_string(std::string_view s) {
  if (s == "sa") return SamplerKind::Metropolis;
  if (s == "sqa") return SamplerKind::Sqa;
  throw Error(Errc::ConfigInvalid, "unknown sampler '" + std::string(s) + "' (expected sa or sqa)");
}

inline ScreenSplit screen_split_from_string(std::string_view s) {
  if (s == "train") return ScreenSplit::Train;
  if (s == "test") return ScreenSplit::Test;
  if (s == "all") return ScreenSplit::All;
  throw Error(Errc::ConfigInvalid, "unknown screen split '" + std::string(s) + "'");
}

inline Interpolation interpolation_from_string(std::string_view s) {
  if (s == "linear") return Interpolation::Linear;
  if (s == "geometric") return Interpolation::Geometric;
  throw Error(Errc::ConfigInvalid, "unknown interpolation '" + std::string(s) + "'");
}

/// Parses a threshold given on the command line: a value below 1 is a
/// fraction of the train rows, anything else an integer count.
inline void set_threshold(RunConfig& c, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(Errc::ConfigInvalid, "threshold must be positive");
  }
  if (value < 1.0) {
    c.threshold_fraction = value;
    return;
  }
  if (value != std::floor(value)) {
    throw Error(Errc::ConfigInvalid, "threshold count must be an integer");
  }
  c.threshold_fraction.reset();
  c.threshold_count = static_cast<std::size_t>(value);
}

/// Applies a JSON config document on top of `c`. Relative paths are taken
/// relative to `base_dir` (the config file's directory).
inline void apply_config_json(RunConfig& c, const nlohmann::json& j,
                              const std::filesystem::path& base_dir) {
  using detail::get_as;
  using nlohmann::json;
  auto path_of = [&](const json& v, std::string_view key) {
    std::filesystem::path p = get_as<std::string>(v, key);
    return p.is_relative() ? base_dir / p : p;
  };
  detail::for_each_key(j, "config", [&](const std::string& key, const json& v) {
    if (key == "input") c.input = path_of(v, key);
    else if (key == "smiles_col") c.smiles_column = get_as<std::string>(v, key);
    else if (key == "gap_col") c.gap_column = get_as<std::string>(v, key);
    else if (key == "target_gap") c.target_gap = get_as<double>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "normalize_energy") c.normalize_energy = get_as<bool>(v, key);
    else if (key == "output_dir") c.output_dir = path_of(v, key);
    else if (key == "fingerprint") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "radius") c.radius = get_as<int>(w, k);
        else if (k == "nbits") c.nbits = get_as<std::size_t>(w, k);
        else if (k == "precomputed") c.precomputed_fingerprints = path_of(w, k);
        else return false;
        return true;
      });
    } else if (key == "compression") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "threshold") {
          c.threshold_count = get_as<std::size_t>(w, k);
          c.threshold_fraction.reset();
        } else if (k == "threshold_fraction") {
          c.threshold_fraction = get_as<double>(w, k);
        } else {
          return false;
        }
        return true;
      });
    } else if (key == "split") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k != "train_fraction") return false;
        c.train_fraction = get_as<double>(w, k);
        return true;
      });
    } else if (key == "sgd") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "penalty") c.sgd.penalty = penalty_from_string(get_as<std::string>(w, k));
        else if (k == "alpha") c.sgd.alpha = get_as<double>(w, k);
        else if (k == "eta") c.sgd.eta = get_as<double>(w, k);
        else if (k == "epochs") c.sgd.epochs = get_as<int>(w, k);
        else if (k == "shuffle") c.sgd.shuffle_each_epoch = get_as<bool>(w, k);
        else if (k == "max_variables") c.sgd.max_variables = get_as<std::size_t>(w, k);
        else return false;
        return true;
      });
    } else if (key == "anneal") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "trotter_slices") c.schedule.trotter_slices = get_as<std::size_t>(w, k);
        else if (k == "beta") c.schedule.beta = get_as<double>(w, k);
        else if (k == "gamma_start") c.schedule.gamma_start = get_as<double>(w, k);
        else if (k == "gamma_end") c.schedule.gamma_end = get_as<double>(w, k);
        else if (k == "sweeps") c.schedule.sweeps = get_as<std::size_t>(w, k);
        else if (k == "reads") c.reads = get_as<std::size_t>(w, k);
        else if (k == "interpolation") c.schedule.interpolation = interpolation_from_string(get_as<std::string>(w, k));
        else return false;
        return true;
      });
    } else if (key == "sampler") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "kind") c.sampler = sampler_from_string(get_as<std::string>(w, k));
        else if (k == "beta") c.sample_beta = get_as<double>(w, k);
        else if (k == "num_samples") c.num_samples = get_as<std::size_t>(w, k);
        else if (k == "burn_in") c.burn_in = get_as<std::size_t>(w, k);
        else if (k == "thin") c.thin = get_as<std::size_t>(w, k);
        else return false;
        return true;
      });
    } else if (key == "gbdt") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "num_trees") c.gbdt.num_trees = get_as<int>(w, k);
        else if (k == "max_depth") c.gbdt.max_depth = get_as<int>(w, k);
        else if (k == "learning_rate") c.gbdt.learning_rate = get_as<double>(w, k);
        else if (k == "min_samples_leaf") c.gbdt.min_samples_leaf = get_as<std::size_t>(w, k);
        else return false;
        return true;
      });
    } else if (key == "importance") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k == "k") c.k = get_as<std::size_t>(w, k);
        else if (k == "metric") c.metric = importance_metric_from_string(get_as<std::string>(w, k));
        else return false;
        return true;
      });
    } else if (key == "screen") {
      detail::for_each_key(v, key, [&](const std::string& k, const json& w) {
        if (k != "split") return false;
        c.screen_split = screen_split_from_string(get_as<std::string>(w, k));
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  // Fail at load time rather than several stages into a run.
  c.schedule.validate();
  c.gbdt.validate();
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, "config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_config_json(c, j, path.parent_path());
  return c;
}

/// Config snapshot; the same key set load_config accepts, plus nothing else.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json compression;
  if (c.threshold_fraction) compression["threshold_fraction"] = *c.threshold_fraction;
  else compression["threshold"] = c.threshold_count;
  nlohmann::json fingerprint = {{"radius", c.radius}, {"nbits", c.nbits}};
  if (c.precomputed_fingerprints) fingerprint["precomputed"] = c.precomputed_fingerprints->generic_string();
  return {
      {"input", c.input.generic_string()},
      {"smiles_col", c.smiles_column},
      {"gap_col", c.gap_column},
      {"target_gap", c.target_gap},
      {"seed", c.seed},
      {"normalize_energy", c.normalize_energy},
      {"output_dir", c.output_dir.generic_string()},
      {"fingerprint", fingerprint},
      {"compression", compression},
      {"split", {{"train_fraction", c.train_fraction}}},
      {"sgd",
       {{"penalty", std::string(to_string(c.sgd.penalty))},
        {"alpha", c.sgd.alpha},
        {"eta", c.sgd.eta},
        {"epochs", c.sgd.epochs},
        {"shuffle", c.sgd.shuffle_each_epoch},
        {"max_variables", c.sgd.max_variables}}},
      {"anneal",
       {{"trotter_slices", c.schedule.trotter_slices},
        {"beta", c.schedule.beta},
        {"gamma_start", c.schedule.gamma_start},
        {"gamma_end", c.schedule.gamma_end},
        {"sweeps", c.schedule.sweeps},
        {"reads", c.reads},
        {"interpolation", c.schedule.interpolation == Interpolation::Linear ? "linear" : "geometric"}}},
      {"sampler",
       {{"kind", detail::sampler_name(c.sampler)},
        {"beta", c.sample_beta},
        {"num_samples", c.num_samples},
        {"burn_in", c.burn_in},
        {"thin", c.thin}}},
      {"gbdt",
       {{"num_trees", c.gbdt.num_trees},
        {"max_depth", c.gbdt.max_depth},
        {"learning_rate", c.gbdt.learning_rate},
        {"min_samples_leaf", c.gbdt.min_samples_leaf}}},
      {"importance",
       {{"k", c.k}, {"metric", c.metric == ImportanceMetric::Gain ? "gain" : "frequency"}}},
      {"screen", {{"split", detail::split_name(c.screen_split)}}},
  };
}

// ---------------------------------------------------------------------------
// Artifacts

namespace artifact {
inline constexpr const char* kRecords = "records.csv";
inline constexpr const char* kFingerprints = "fingerprints.txt";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kFeatureMap = "feature_map.json";
inline constexpr const char* kFeatures = "features.txt";
inline constexpr const char* kQubo = "qubo.txt";
inline constexpr const char* kFitReport = "fit_report.json";
inline constexpr const char* kAnnealSamples = "anneal_samples.csv";
inline constexpr const char* kAnneal = "anneal.json";
inline constexpr const char* kSamples = "samples.csv";
inline constexpr const char* kSample = "sample.json";
inline constexpr const char* kImportance = "importance.json";
inline constexpr const char* kScreen = "screen.csv";
inline constexpr const char* kScreenSummary = "screen.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

inline std::vector<std::string> stage_outputs(Stage s) {
  using namespace artifact;
  switch (s) {
    case Stage::Ingest: return {kRecords};
    case Stage::Featurize: return {kFingerprints, kSplit, kFeatureMap, kFeatures};
    case Stage::Train: return {kQubo, kFitReport};
    case Stage::Anneal: return {kAnnealSamples, kAnneal};
    case Stage::Sample: return {kSamples, kSample};
    case Stage::Importance: return {kImportance};
    case Stage::Screen: return {kScreen, kScreenSummary};
    case Stage::Report: return {kReport, kReportText};
  }
  return {};
}

inline nlohmann::json format_versions() {
  return {{"records", 1},  {"fingerprint_hash", kFingerprintHashVersion},
          {"feature_map", 1}, {"qubo", 1},
          {"samples", 1},  {"importance", 1},
          {"screen", 1},   {"report", 1},
          {"manifest", 1}};
}

namespace detail {

inline std::filesystem::path require(const RunConfig& c, const char* name, Stage consumer) {
  auto p = c.output_dir / name;
  if (!std::filesystem::exists(p)) {
    throw Error(Errc::MissingUpstreamArtifact, std::string(to_string(consumer)) + ": missing " +
                                                   p.generic_string() + "; run the upstream stage first");
  }
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedNumber, path.generic_string() + ": " + e.what());
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += "\"\"";
    else q += ch;
  }
  return q + "\"";
}

struct RecordRow {
  std::string smiles;
  double gap = 0.0;
  double cost = 0.0;
};

inline std::string records_header() { return "row,smiles,gap,cost"; }

inline void append_record(std::string& out, std::size_t row, const RecordRow& r) {
  out += std::to_string(row) + ',' + csv_field(r.smiles) + ',' + format_double(r.gap) + ',' +
         format_double(r.cost) + '\n';
}

/// Reads records.csv back; row numbers must run 0, 1, 2, ...
inline std::vector<RecordRow> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != records_header()) {
    throw Error(Errc::MissingColumn, path.generic_string() + ": expected header " + records_header(), 1);
  }
  std::vector<RecordRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(trim(line));
    std::optional<double> gap, cost;
    if (f.size() == 4) {
      gap = parse_double(f[2]);
      cost = parse_double(f[3]);
    }
    if (f.size() != 4 || f[0] != std::to_string(rows.size()) || !gap || !cost) {
      throw Error(Errc::MalformedNumber,
                  path.generic_string() + ": malformed line " + std::to_string(line_no), line_no);
    }
    rows.push_back({f[1], *gap, *cost});
  }
  if (rows.empty()) throw Error(Errc::EmptyFile, path.generic_string() + ": no records");
  return rows;
}

inline SampleSet load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_samples(in);
}

inline void save_samples(const std::filesystem::path& path, const SampleSet& set) {
  std::ostringstream out;
  write_samples(out, set);
  write_file(path, out.str());
}

inline std::vector<std::size_t> index_list(const nlohmann::json& j, std::string_view key,
                                           std::size_t bound) {
  std::vector<std::size_t> out;
  try {
    out = j.at(std::string(key)).get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::MissingColumn, "split.json: missing or invalid '" + std::string(key) + "'");
  }
  for (auto i : out) {
    if (i >= bound) throw Error(Errc::IndexOutOfRange, "split.json: row " + std::to_string(i) + " out of range");
  }
  return out;
}

/// Energy model used by anneal and sample: the trained QUBO, optionally
/// scaled so its largest coefficient has magnitude 1.
inline std::pair<QuboModel, double> sampling_model(const RunConfig& c, const QuboModel& model) {
  const double m = max_abs_coefficient(model);
  const double factor = (c.normalize_energy && m > 0.0) ? 1.0 / m : 1.0;
  return {factor == 1.0 ? model : scaled(model, factor), factor};
}

/// Largest disagreement between stored energies and an independent sparse
/// re-evaluation: relative where the stored energy is nonzero, absolute
/// otherwise.
inline double recomputed_delta(const QuboModel& model, const SampleSet& set) {
  double worst = 0.0;
  for (const auto& e : set.entries) {
    const double truth = predict(model, e.bits);
    const double d = e.energy == 0.0 ? std::abs(truth) : std::abs(e.energy - truth) / std::abs(e.energy);
    worst = std::max(worst, d);
  }
  return worst;
}

inline double train_min_cost(const std::vector<RecordRow>& records,
                             const std::vector<std::size_t>& train) {
  double m = std::numeric_limits<double>::infinity();
  for (auto i : train) m = std::min(m, records[i].cost);
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

inline void stage_ingest(const RunConfig& c) {
  if (c.input.empty()) throw Error(Errc::ConfigInvalid, "ingest: no input file configured");
  if (!std::filesystem::exists(c.input)) {
    throw Error(Errc::ConfigInvalid, "ingest: input file " + c.input.generic_string() + " does not exist");
  }
  if (!std::isfinite(c.target_gap)) throw Error(Errc::ConfigInvalid, "target_gap must be finite");
  const auto records = ingest_csv(c.input, c.smiles_column, c.gap_column);
  if (records.empty()) throw Error(Errc::EmptyFile, "ingest: " + c.input.generic_string() + " has no data rows");
  std::string out = detail::records_header() + "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    detail::append_record(out, i, {records[i].smiles, records[i].gap, cost(records[i].gap, c.target_gap)});
  }
  detail::write_file(c.output_dir / artifact::kRecords, out);
}

inline void stage_featurize(const RunConfig& c) {
  const auto records = detail::read_records(detail::require(c, artifact::kRecords, Stage::Featurize));
  const std::size_t n = records.size();

  std::vector<FingerprintVector> fps;
  if (c.precomputed_fingerprints) {
    if (!std::filesystem::exists(*c.precomputed_fingerprints)) {
      throw Error(Errc::ConfigInvalid,
                  "featurize: precomputed file " + c.precomputed_fingerprints->generic_string() + " does not exist");
    }
    fps = load_precomputed(*c.precomputed_fingerprints);
    if (fps.size() != n) {
      throw Error(Errc::LengthMismatch, "featurize: " + std::to_string(fps.size()) +
                                            " precomputed fingerprints for " + std::to_string(n) + " records");
    }
  } else {
    if (c.nbits < 8) throw Error(Errc::ConfigInvalid, "fingerprint nbits must be >= 8");
    fps.resize(n);
    std::vector<std::exception_ptr> failures(n);
    parallel_for(n, [&](std::size_t i) {
      try {
        fps[i] = circular_fingerprint(parse_smiles(records[i].smiles), c.radius, c.nbits);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    });
    // Report the first bad row in input order, whatever the thread timing.
    for (std::size_t i = 0; i < n; ++i) {
      if (!failures[i]) continue;
      try {
        std::rethrow_exception(failures[i]);
      } catch (const Error& e) {
        if (e.code() == Errc::ConfigInvalid || e.code() == Errc::InvalidWidth) throw;
        throw Error(e.code(), "featurize: row " + std::to_string(i) + " '" + records[i].smiles + "': " + e.what(), i);
      }
    }
  }

  const auto split = split_indices(n, {c.train_fraction, stage_seed(c, "split")});
  std::vector<FingerprintVector> train;
  train.reserve(split.train.size());
  for (auto i : split.train) train.push_back(fps[i]);
  if (train.empty()) throw Error(Errc::EmptyTrainSet, "featurize: train split is empty");

  const std::size_t threshold =
      c.threshold_fraction
          ? std::max<std::size_t>(1, threshold_from_fraction(*c.threshold_fraction, train.size()))
          : c.threshold_count;
  if (threshold < 1) throw Error(Errc::ConfigInvalid, "compression threshold must be >= 1");
  const auto map = fit_compression(train, threshold);
  if (map.width() == 0) {
    throw Error(Errc::ConfigInvalid, "featurize: compression threshold " + std::to_string(threshold) +
                                         " keeps no columns on " + std::to_string(train.size()) + " train rows");
  }

  std::ostringstream fp_text, feat_text;
  write_fingerprints(fp_text, fps);
  for (const auto& fp : fps) feat_text << apply_compression(map, fp).to_string() << '\n';

  detail::write_file(c.output_dir / artifact::kFingerprints, fp_text.str());
  detail::write_json(c.output_dir / artifact::kSplit,
                     {{"train_fraction", c.train_fraction},
                      {"seed", stage_seed(c, "split")},
                      {"train", split.train},
                      {"test", split.test}});
  detail::write_json(c.output_dir / artifact::kFeatureMap, to_json(map));
  detail::write_file(c.output_dir / artifact::kFeatures, feat_text.str());
}

namespace detail {

struct FeaturizedData {
  std::vector<RecordRow> records;
  std::vector<FingerprintVector> features;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline FeaturizedData load_featurized(const RunConfig& c, Stage consumer) {
  FeaturizedData d;
  d.records = read_records(require(c, artifact::kRecords, consumer));
  d.features = load_precomputed(require(c, artifact::kFeatures, consumer));
  const auto split = read_json(require(c, artifact::kSplit, consumer));
  if (d.features.size() != d.records.size()) {
    throw Error(Errc::LengthMismatch, std::string(to_string(consumer)) + ": " + artifact::kFeatures +
                                          " and " + artifact::kRecords + " differ in row count");
  }
  d.train = index_list(split, "train", d.records.size());
  d.test = index_list(split, "test", d.records.size());
  return d;
}

}  // namespace detail

inline void stage_train(const RunConfig& c) {
  const auto d = detail::load_featurized(c, Stage::Train);
  auto labeled = [&](const std::vector<std::size_t>& rows) {
    std::vector<LabeledExample> out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back({d.features[i], d.records[i].cost});
    return out;
  };
  SgdConfig cfg = c.sgd;
  cfg.seed = stage_seed(c, "train");
  auto [model, report] = sgd_fit(labeled(d.train), cfg, labeled(d.test));
  std::ostringstream q;
  write_qubo(q, model);
  detail::write_file(c.output_dir / artifact::kQubo, q.str());
  auto j = to_json(report);
  j["seed"] = cfg.seed;
  j["n_variables"] = model.size();
  j["n_train"] = d.train.size();
  j["n_test"] = d.test.size();
  j["loss"] = "mean of 0.5 * (prediction - cost)^2 over the train split, penalty excluded";
  detail::write_json(c.output_dir / artifact::kFitReport, j);
}

inline void stage_anneal(const RunConfig& c) {
  const auto model = import_qubo(detail::require(c, artifact::kQubo, Stage::Anneal));
  const auto d = detail::load_featurized(c, Stage::Anneal);
  if (d.features.front().width() != model.size()) {
    throw Error(Errc::WidthMismatch, "anneal: qubo.txt has " + std::to_string(model.size()) +
                                         " variables, features.txt has width " +
                                         std::to_string(d.features.front().width()));
  }
  const auto [work, factor] = detail::sampling_model(c, model);
  const std::uint64_t seed = stage_seed(c, "anneal");
  const auto set = rescore_samples(model, sqa_optimize(work, c.schedule, c.reads, seed));
  detail::save_samples(c.output_dir / artifact::kAnnealSamples, set);

  const auto& best = set.best();
  const double delta = detail::recomputed_delta(model, set);
  const double min_cost = detail::train_min_cost(d.records, d.train);
  std::vector<FingerprintVector> train_rows;
  for (auto i : d.train) train_rows.push_back(d.features[i]);
  const auto nov = novelty_check(best.bits, train_rows);
  detail::write_json(c.output_dir / artifact::kAnneal,
                     {{"best_bitstring", best.bits.to_string()},
                      {"best_energy", best.energy},
                      {"best_count", best.count},
                      {"delta", delta},
                      {"train_min_cost", min_cost},
                      {"beats_train_min", best.energy <= min_cost},
                      {"novelty", {{"min_hamming", nov.min_distance},
                                   {"nearest_row", d.train[nov.nearest_row]},
                                   {"novel", nov.novel()}}},
                      {"distinct", set.entries.size()},
                      {"reads", c.reads},
                      {"seed", seed},
                      {"energy_scale", factor}});
}

inline void stage_sample(const RunConfig& c) {
  const auto model = import_qubo(detail::require(c, artifact::kQubo, Stage::Sample));
  const auto [work, factor] = detail::sampling_model(c, model);
  const std::uint64_t seed = stage_seed(c, "sample");
  SampleSet set;
  if (c.sampler == SamplerKind::Metropolis) {
    set = sa_sample(work, c.sample_beta, c.thin, c.num_samples, c.burn_in, seed);
  } else {
    set = sqa_optimize(work, c.schedule, c.num_samples, seed);
  }
  set = rescore_samples(model, std::move(set));
  detail::save_samples(c.output_dir / artifact::kSamples, set);
  detail::write_json(c.output_dir / artifact::kSample,
                     {{"kind", detail::sampler_name(c.sampler)},
                      {"beta", c.sample_beta},
                      {"num_samples", c.num_samples},
                      {"burn_in", c.burn_in},
                      {"thin", c.thin},
                      {"distinct", set.entries.size()},
                      {"seed", seed},
                      {"energy_scale", factor},
                      {"delta", detail::recomputed_delta(model, set)}});
}

inline void stage_importance(const RunConfig& c) {
  const auto samples = detail::load_samples(detail::require(c, artifact::kSamples, Stage::Importance));
  const auto anneal = detail::load_samples(detail::require(c, artifact::kAnnealSamples, Stage::Importance));
  const auto map = feature_map_from_json(detail::read_json(detail::require(c, artifact::kFeatureMap, Stage::Importance)));
  GbdtConfig cfg = c.gbdt;
  cfg.seed = stage_seed(c, "importance");
  const auto& x_opt = anneal.best().bits;
  const auto report = analyze_importance(samples, x_opt, cfg, c.k, c.metric);
  if (x_opt.width() != map.width()) {
    throw Error(Errc::WidthMismatch, "importance: feature map width differs from sample width");
  }
  auto j = to_json(report, cfg);
  j["x_opt"] = x_opt.to_string();
  std::vector<std::size_t> original;
  nlohmann::json original_polarity = nlohmann::json::array();
  for (const auto& con : report.polarity) {
    original.push_back(map.kept_columns[con.index]);
    original_polarity.push_back({map.kept_columns[con.index], con.bit ? 1 : 0});
  }
  j["top_k_original"] = original;
  j["polarity_original"] = original_polarity;
  detail::write_json(c.output_dir / artifact::kImportance, j);
}

inline void stage_screen(const RunConfig& c) {
  const auto imp = detail::read_json(detail::require(c, artifact::kImportance, Stage::Screen));
  const auto d = detail::load_featurized(c, Stage::Screen);
  std::vector<Constraint> constraints;
  try {
    for (const auto& p : imp.at("polarity")) {
      constraints.push_back({p.at(0).get<std::size_t>(), p.at(1).get<int>() != 0});
    }
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::MissingColumn, "screen: importance.json has no valid 'polarity'");
  }

  std::vector<std::size_t> rows;
  switch (c.screen_split) {
    case ScreenSplit::Train: rows = d.train; break;
    case ScreenSplit::Test: rows = d.test; break;
    case ScreenSplit::All:
      rows.resize(d.records.size());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      break;
  }
  // Report in input order regardless of how the split shuffled rows.
  std::sort(rows.begin(), rows.end());
  if (rows.empty()) throw Error(Errc::EmptyList, "screen: the selected split has no rows");
  std::vector<FingerprintVector> fps;
  fps.reserve(rows.size());
  for (auto i : rows) fps.push_back(d.features[i]);
  const auto result = filter_by_constraints(fps, constraints);

  std::string csv = detail::records_header() + "\n";
  for (auto k : result.kept_indices) detail::append_record(csv, rows[k], d.records[rows[k]]);
  detail::write_file(c.output_dir / artifact::kScreen, csv);
  nlohmann::json cons = nlohmann::json::array();
  for (const auto& con : constraints) cons.push_back({con.index, con.bit ? 1 : 0});
  detail::write_json(c.output_dir / artifact::kScreenSummary,
                     {{"split", detail::split_name(c.screen_split)},
                      {"total", rows.size()},
                      {"kept", result.kept_indices.size()},
                      {"ratio", result.ratio},
                      {"constraints", cons}});
}

inline void stage_report(const RunConfig& c) {
  using detail::read_json;
  using detail::require;
  const auto fit = read_json(require(c, artifact::kFitReport, Stage::Report));
  const auto anneal = read_json(require(c, artifact::kAnneal, Stage::Report));
  const auto imp = read_json(require(c, artifact::kImportance, Stage::Report));
  const auto screen = read_json(require(c, artifact::kScreenSummary, Stage::Report));
  const auto model = import_qubo(require(c, artifact::kQubo, Stage::Report));
  const auto anneal_set = detail::load_samples(require(c, artifact::kAnnealSamples, Stage::Report));
  const auto sample_set = detail::load_samples(require(c, artifact::kSamples, Stage::Report));

  // Recomputed from the files on disk rather than trusted from anneal.json.
  const double delta = std::max(detail::recomputed_delta(model, anneal_set),
                                detail::recomputed_delta(model, sample_set));
  if (!(delta <= kConsistencyTolerance)) {
    throw Error(Errc::ConsistencyFailure, "report: stored energies disagree with the model (delta " +
                                              format_double(delta) + ")");
  }

  nlohmann::json digests = nlohmann::json::object();
  for (Stage s : kAllStages) {
    if (s == Stage::Report) continue;
    nlohmann::json files = nlohmann::json::object();
    for (const auto& name : stage_outputs(s)) files[name] = sha256_file(require(c, name.c_str(), Stage::Report));
    digests[std::string(to_string(s))] = files;
  }

  const double best_energy = anneal_set.best().energy;
  const double min_cost = anneal.at("train_min_cost").get<double>();
  nlohmann::json report = {
      {"r2_train", fit.at("r2_train")},
      {"r2_test", fit.at("r2_test")},
      {"best_energy", best_energy},
      {"best_bitstring", anneal_set.best().bits.to_string()},
      {"train_min_cost", min_cost},
      {"beats_train_min", best_energy <= min_cost},
      {"delta", delta},
      {"delta_ok", true},
      {"top_k", imp.at("top_k")},
      {"top_k_original", imp.at("top_k_original")},
      {"polarity", imp.at("polarity")},
      {"screen_ratio", screen.at("ratio")},
      {"screen_kept", screen.at("kept")},
      {"screen_total", screen.at("total")},
      {"novelty_min_hamming", anneal.at("novelty").at("min_hamming")},
      {"stage_digests", digests},
  };
  detail::write_json(c.output_dir / artifact::kReport, report);

  auto num = [](const nlohmann::json& v) { return v.is_null() ? std::string("n/a") : format_double(v.get<double>()); };
  std::ostringstream t;
  t << "r2 train            " << num(fit.at("r2_train")) << '\n'
    << "r2 test             " << num(fit.at("r2_test")) << '\n'
    << "best energy         " << format_double(best_energy) << '\n'
    << "train minimum cost  " << format_double(min_cost) << (best_energy <= min_cost ? "  (beaten)" : "") << '\n'
    << "consistency delta   " << format_double(delta) << '\n'
    << "novelty (hamming)   " << anneal.at("novelty").at("min_hamming").get<std::size_t>() << '\n'
    << "screen              " << screen.at("kept").get<std::size_t>() << " / "
    << screen.at("total").get<std::size_t>() << " (ratio " << num(screen.at("ratio")) << ")\n"
    << "top features        ";
  for (const auto& p : imp.at("polarity")) t << p.at(0).get<std::size_t>() << '=' << p.at(1).get<int>() << ' ';
  t << '\n';
  detail::write_file(c.output_dir / artifact::kReportText, t.str());
}

// ---------------------------------------------------------------------------
// Manifest and driver

/// Records the config snapshot, format versions and this stage's output
/// digests and wall time. Other stages' entries are kept.
inline void update_manifest(const RunConfig& c, Stage s, double wall_seconds) {
  const auto path = c.output_dir / artifact::kManifest;
  nlohmann::json m = nlohmann::json::object();
  if (std::filesystem::exists(path)) {
    try {
      m = detail::read_json(path);
    } catch (const Error&) {
      m = nlohmann::json::object();  // a damaged manifest is rebuilt, not fatal
    }
  }
  m["config"] = to_json(c);
  m["format_versions"] = format_versions();
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& name : stage_outputs(s)) outputs[name] = sha256_file(c.output_dir / name);
  m["stages"][std::string(to_string(s))] = {{"outputs", outputs}, {"wall_seconds", wall_seconds}};
  detail::write_json(path, m);
}

inline void run_stage(Stage s, const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create output directory " + c.output_dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  switch (s) {
    case Stage::Ingest: stage_ingest(c); break;
    case Stage::Featurize: stage_featurize(c); break;
    case Stage::Train: stage_train(c); break;
    case Stage::Anneal: stage_anneal(c); break;
    case Stage::Sample: stage_sample(c); break;
    case Stage::Importance: stage_importance(c); break;
    case Stage::Screen: stage_screen(c); break;
    case Stage::Report: stage_report(c); break;
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;
  update_manifest(c, s, wall.count());
}

/// Exit status for a failure: 2 config, 3 data, 4 missing artifact,
/// 5 numerical.
constexpr int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigInvalid:
    case Errc::InvalidSchedule:
    case Errc::InvalidBeta:
    case Errc::InvalidWidth:
    case Errc::DimensionCapExceeded:
    case Errc::TooLarge:
      return 2;
    case Errc::MissingUpstreamArtifact:
      return 4;
    case Errc::NonFiniteLossDiverged:
    case Errc::ZeroVariance:
    case Errc::ZeroDenominator:
    case Errc::ConsistencyFailure:
    case Errc::DegenerateSamples:
      return 5;
    default:
      return 3;
  }
}

}  // namespace qscreen
