#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "svddlab/config.hpp"
#include "svddlab/evalreport.hpp"
#include "svddlab/trainer.hpp"

namespace svddlab {

/// Corpus, splits and the dense matrices a training run consumes.
struct PreparedData {
  SplitCorpus corpus;
  TrainData train;
  Tensor test_x;
};

/// Naturals from data_seed, then splits/corruptions from a derived seed.
SplitCorpus generate_corpus(const RunConfig& config);
PreparedData prepare_data(SplitCorpus corpus, std::size_t probe_size);

struct RunOutcome {
  TrainResult result;
  double test_auc = 0.0;  // best-validation checkpoint on the test split
  std::vector<double> test_scores;
  std::vector<std::uint8_t> test_truth;
};

RunOutcome run_once(const RunConfig& config, const PreparedData& data);

/// Worker count for experiment grids: SVDDLAB_THREADS if set (>= 1),
/// otherwise the hardware concurrency.
std::size_t grid_threads();

struct ExperimentCell {
  std::string label;
  RunConfig config;  // seed field holds the base seed
};

struct Experiment {
  std::string name;
  std::vector<ExperimentCell> cells;
  std::size_t seeds = 5;
};

std::vector<std::string> experiment_names();

/// Desk-scale base configuration for the packaged experiments.
RunConfig reproduce_defaults();

/// Builds a named grid on top of base. Throws ConfigError for unknown names.
Experiment make_experiment(const std::string& name, const RunConfig& base);

struct CellRun {
  std::string label;
  std::uint64_t seed = 0;
  RunOutcome outcome;
};

using ProgressFn = std::function<void(const CellRun&)>;

/// Runs every (cell, seed) pair, seeds base + 0..seeds-1, on grid_threads()
/// workers. Results come back in grid order regardless of scheduling.
std::vector<CellRun> run_experiment(const Experiment& experiment, const ProgressFn& progress = {});

/// summary.csv, runs.csv, per-run ROC and trajectory CSVs.
void write_experiment(const std::vector<CellRun>& runs, const std::filesystem::path& dir);

}  // namespace svddlab
