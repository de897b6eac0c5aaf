#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svddlab/metrics_log.hpp"

namespace svddlab {

/// Probability that a random anomalous score exceeds a random normal one,
/// ties counted as 1/2. truth: 1 = anomalous, 0 = normal; both must occur.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct RocPoint {
  double fpr;
  double tpr;
};

/// ROC curve from (0,0) to (1,1), one vertex per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Trapezoidal area under a polyline of ROC points.
double trapezoid_area(std::span<const RocPoint> points);

struct RunSummary {
  double mean = 0.0;
  std::optional<double> std;  // sample std, absent for a single run
};

RunSummary aggregate_runs(std::span<const double> aucs);

/// Formats a double with 17 significant digits.
std::string format_double(double v);

struct RunRecord {
  std::string config;  // configuration label shared by the seeds of one cell
  std::uint64_t seed = 0;
  double auc = 0.0;
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;
  std::vector<TrainLogRow> log;
};

/// Writes summary.csv (one row per distinct config, first-seen order),
/// roc_<config>_<seed>.csv and trajectory_<config>_<seed>.csv into dir.
void emit_report(std::span<const RunRecord> runs, const std::filesystem::path& dir);

}  // namespace svddlab
