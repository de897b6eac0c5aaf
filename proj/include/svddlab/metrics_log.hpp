#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace svddlab {

/// One training iteration. Epoch-end columns are only set on the last
/// iteration of each epoch; inapplicable columns stay empty.
struct TrainLogRow {
  int epoch = 0;
  long iter = 0;
  double l_svdd = 0.0;
  std::optional<double> l_reg;
  double c_t = 0.0;
  std::optional<double> radius;
  std::optional<double> threshold;
  std::optional<double> collapse_metric;
  std::optional<double> val_auc;
  std::optional<bool> collapsed;
};

inline constexpr const char* kMetricsHeader =
    "epoch,iter,l_svdd,l_reg,c_t,R,threshold,collapse_metric,val_auc,collapsed";

void write_metrics_csv(std::ostream& out, const std::vector<TrainLogRow>& rows);
void save_metrics_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows);
std::vector<TrainLogRow> load_metrics_csv(const std::filesystem::path& path);
std::vector<TrainLogRow> parse_metrics_csv(std::istream& in);

}  // namespace svddlab
