#include "svddlab/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "svddlab/error.hpp"

namespace svddlab {

namespace {

void check_scored(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ConfigError("scores and truth lengths differ");
  const auto anomalous = std::count(truth.begin(), truth.end(), std::uint8_t{1});
  const auto normal = std::count(truth.begin(), truth.end(), std::uint8_t{0});
  if (anomalous + normal != static_cast<std::ptrdiff_t>(truth.size())) {
    throw ConfigError("truth labels must be 0 or 1");
  }
  if (anomalous == 0 || normal == 0) throw ConfigError("AUC needs both normal and anomalous samples");
  for (double s : scores) {
    if (std::isnan(s)) throw NumericError("AUC input contains NaN scores");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_scored(scores, truth);
  const auto order = order_by_score(scores);
  // Mann-Whitney U from mid-ranks; ties share the average rank.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (truth[order[k]]) rank_sum += mid_rank;
    }
    i = j + 1;
  }
  const auto n_anom = static_cast<double>(std::count(truth.begin(), truth.end(), std::uint8_t{1}));
  const auto n_norm = static_cast<double>(truth.size()) - n_anom;
  const double u = rank_sum - n_anom * (n_anom + 1.0) / 2.0;
  return u / (n_anom * n_norm);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_scored(scores, truth);
  auto order = order_by_score(scores);
  std::reverse(order.begin(), order.end());
  const auto n_anom = static_cast<double>(std::count(truth.begin(), truth.end(), std::uint8_t{1}));
  const auto n_norm = static_cast<double>(truth.size()) - n_anom;
  std::vector<RocPoint> pts{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (truth[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    pts.push_back({fp / n_norm, tp / n_anom});
  }
  return pts;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

RunSummary aggregate_runs(std::span<const double> aucs) {
  if (aucs.empty()) throw ConfigError("aggregate_runs: no runs");
  RunSummary s;
  double total = 0.0;
  for (double a : aucs) total += a;
  s.mean = total / static_cast<double>(aucs.size());
  if (aucs.size() >= 2) {
    double ss = 0.0;
    for (double a : aucs) ss += (a - s.mean) * (a - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(aucs.size() - 1));
  }
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::string file_label(const RunRecord& r) { return r.config + "_" + std::to_string(r.seed); }

}  // namespace

void emit_report(std::span<const RunRecord> runs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());

  std::vector<std::string> configs;
  std::map<std::string, std::vector<double>> aucs;
  for (const RunRecord& r : runs) {
    if (!aucs.count(r.config)) configs.push_back(r.config);
    aucs[r.config].push_back(r.auc);
  }
  {
    auto out = open_out(dir / "summary.csv");
    out << "config,runs,mean_auc,std_auc\n";
    for (const auto& c : configs) {
      const RunSummary s = aggregate_runs(aucs[c]);
      out << c << ',' << aucs[c].size() << ',' << format_double(s.mean) << ','
          << (s.std ? format_double(*s.std) : "") << '\n';
    }
    if (!out) throw IoError("failed writing " + (dir / "summary.csv").string());
  }
  for (const RunRecord& r : runs) {
    if (!r.scores.empty()) {
      const auto path = dir / ("roc_" + file_label(r) + ".csv");
      auto out = open_out(path);
      out << "fpr,tpr\n";
      for (const RocPoint& p : roc_curve(r.scores, r.truth)) {
        out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
      }
      if (!out) throw IoError("failed writing " + path.string());
    }
    if (!r.log.empty()) {
      const auto path = dir / ("trajectory_" + file_label(r) + ".csv");
      auto out = open_out(path);
      write_metrics_csv(out, r.log);
      if (!out) throw IoError("failed writing " + path.string());
    }
  }
}

}  // namespace svddlab
