// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

// qscreen: command-line driver for the QUBO surrogate screening pipeline.
//
//   qscreen pipeline --config data/synthetic_config.json --out run/
//   qscreen train --config run.json --penalty l1
//
// Settings come from a JSON config file, then the QSCREEN_OUTPUT_DIR
// environment variable (output directory only), then flags; later sources
// win. Failures print one JSON line on stderr and exit with 2 (config),
// 3 (data), 4 (missing upstream artifact) or 5 (numerical failure).

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qscreen/qscreen.hpp"

namespace {

using qscreen::RunConfig;

struct Flags {
  std::string config, input, out, smiles_col, gap_col, penalty, sampler;
  double target = 0, threshold = 0, beta = 0, gamma_start = 0, gamma_end = 0;
  double alpha = 0, eta = 0, sample_beta = 0;
  std::size_t sweeps = 0, trotter = 0, reads = 0, k = 0, samples = 0;
  std::uint64_t seed = 0;
  int epochs = 0;
};

using Setter = std::pair<CLI::Option*, std::function<void(RunConfig&)>>;

/// Registers the shared flag set on one subcommand. The returned setters are
/// applied, in order, only for flags that were actually given.
std::vector<Setter> add_flags(CLI::App* cmd, Flags& f) {
  std::vector<Setter> s;
  cmd->add_option("--config", f.config, "JSON config file");
  s.emplace_back(cmd->add_option("--input", f.input, "input CSV"),
                 [&f](RunConfig& c) { c.input = f.input; });
  s.emplace_back(cmd->add_option("--out", f.out, "output directory"),
                 [&f](RunConfig& c) { c.output_dir = f.out; });
  s.emplace_back(cmd->add_option("--smiles-col", f.smiles_col, "SMILES column name"),
                 [&f](RunConfig& c) { c.smiles_column = f.smiles_col; });
  s.emplace_back(cmd->add_option("--gap-col", f.gap_col, "gap column name"),
                 [&f](RunConfig& c) { c.gap_column = f.gap_col; });
  s.emplace_back(cmd->add_option("--target", f.target, "target gap in eV (default 0.32)"),
                 [&f](RunConfig& c) { c.target_gap = f.target; });
  s.emplace_back(cmd->add_option("--threshold", f.threshold,
                                 "compression threshold: a count, or a fraction of train rows if below 1"),
                 [&f](RunConfig& c) { qscreen::set_threshold(c, f.threshold); });
  s.emplace_back(cmd->add_option("--sweeps", f.sweeps, "annealing sweeps (default 500)"),
                 [&f](RunConfig& c) { c.schedule.sweeps = f.sweeps; });
  s.emplace_back(cmd->add_option("--trotter", f.trotter, "Trotter slices (default 16)"),
                 [&f](RunConfig& c) { c.schedule.trotter_slices = f.trotter; });
  s.emplace_back(cmd->add_option("--beta", f.beta, "annealing inverse temperature (default 10)"),
                 [&f](RunConfig& c) { c.schedule.beta = f.beta; });
  s.emplace_back(cmd->add_option("--gamma-start", f.gamma_start, "initial transverse field (default 3)"),
                 [&f](RunConfig& c) { c.schedule.gamma_start = f.gamma_start; });
  s.emplace_back(cmd->add_option("--gamma-end", f.gamma_end, "final transverse field (default 0.01)"),
                 [&f](RunConfig& c) { c.schedule.gamma_end = f.gamma_end; });
  s.emplace_back(cmd->add_option("--reads", f.reads, "annealing reads (default 100)"),
                 [&f](RunConfig& c) { c.reads = f.reads; });
  s.emplace_back(cmd->add_option("--seed", f.seed, "root seed (default 42)"),
                 [&f](RunConfig& c) { c.seed = f.seed; });
  s.emplace_back(cmd->add_option("--k", f.k, "number of important features (default 20)"),
                 [&f](RunConfig& c) { c.k = f.k; });
  s.emplace_back(cmd->add_option("--penalty", f.penalty, "none, l1 or l2 (default l2)"),
                 [&f](RunConfig& c) { c.sgd.penalty = qscreen::penalty_from_string(f.penalty); });
  s.emplace_back(cmd->add_option("--alpha", f.alpha, "regularization strength (default 0.1)"),
                 [&f](RunConfig& c) { c.sgd.alpha = f.alpha; });
  s.emplace_back(cmd->add_option("--eta", f.eta, "SGD learning rate (default 0.001)"),
                 [&f](RunConfig& c) { c.sgd.eta = f.eta; });
  s.emplace_back(cmd->add_option("--epochs", f.epochs, "SGD epochs (default 160)"),
                 [&f](RunConfig& c) { c.sgd.epochs = f.epochs; });
  s.emplace_back(cmd->add_option("--sampler", f.sampler, "sa or sqa (default sa)"),
                 [&f](RunConfig& c) { c.sampler = qscreen::sampler_from_string(f.sampler); });
  s.emplace_back(cmd->add_option("--sample-beta", f.sample_beta, "sampler inverse temperature (default 5)"),
                 [&f](RunConfig& c) { c.sample_beta = f.sample_beta; });
  s.emplace_back(cmd->add_option("--samples", f.samples, "number of samples (default 1000)"),
                 [&f](RunConfig& c) { c.num_samples = f.samples; });
  return s;
}

void print_error(std::string_view code, int exit_code, std::string_view stage, const std::string& message,
                 std::optional<std::size_t> location = std::nullopt) {
  nlohmann::json j = {{"error", code}, {"exit", exit_code}, {"message", message}};
  if (!stage.empty()) j["stage"] = stage;
  if (location) j["location"] = *location;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QUBO surrogate screening pipeline"};
  app.require_subcommand(1);
  Flags flags;

  struct Command {
    CLI::App* app;
    std::vector<qscreen::Stage> stages;
    std::vector<Setter> setters;
  };
  std::vector<Command> commands;
  for (auto stage : qscreen::kAllStages) {
    auto* sub = app.add_subcommand(std::string(qscreen::to_string(stage)),
                                   "run the " + std::string(qscreen::to_string(stage)) + " stage");
    commands.push_back({sub, {stage}, add_flags(sub, flags)});
  }
  auto* all = app.add_subcommand("pipeline", "run every stage in order");
  commands.push_back({all, {std::begin(qscreen::kAllStages), std::end(qscreen::kAllStages)}, add_flags(all, flags)});

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("ConfigInvalid", 2, "", e.what());
    return 2;
  }

  const Command* cmd = nullptr;
  for (const auto& c : commands) {
    if (c.app->parsed()) cmd = &c;
  }

  std::string_view current;
  try {
    RunConfig config = flags.config.empty() ? RunConfig{} : qscreen::load_config(flags.config);
    if (const char* env = std::getenv(qscreen::kOutputDirEnv.data()); env != nullptr && *env != '\0') {
      config.output_dir = env;
    }
    for (const auto& [opt, apply] : cmd->setters) {
      if (opt->count() > 0) apply(config);
    }
    config.schedule.validate();
    config.gbdt.validate();
    for (auto stage : cmd->stages) {
      current = qscreen::to_string(stage);
      const auto t0 = std::chrono::steady_clock::now();
      qscreen::run_stage(stage, config);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      std::cerr << "qscreen: " << current << " done in " << qscreen::format_double(dt.count()) << " s\n";
    }
    if (!cmd->stages.empty() && cmd->stages.back() == qscreen::Stage::Report) {
      std::ifstream text(config.output_dir / qscreen::artifact::kReportText);
      std::cout << text.rdbuf();
    }
  } catch (const qscreen::Error& e) {
    const int code = qscreen::exit_code(e.code());
    print_error(qscreen::to_string(e.code()), code, current, e.what(), e.location());
    return code;
  } catch (const nlohmann::json::exception& e) {
    print_error("MalformedArtifact", 3, current, e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("Failure", 3, current, e.what());
    return 3;
  }
  return 0;
}
