#include "svddlab/metrics_log.hpp"

#include <fstream>
#include <sstream>

#include "svddlab/error.hpp"
#include "svddlab/evalreport.hpp"

namespace svddlab {

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<TrainLogRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const TrainLogRow& r : rows) {
    out << r.epoch << ',' << r.iter << ',' << format_double(r.l_svdd) << ',' << opt(r.l_reg) << ','
        << format_double(r.c_t) << ',' << opt(r.radius) << ',' << opt(r.threshold) << ','
        << opt(r.collapse_metric) << ',' << opt(r.val_auc) << ','
        << (r.collapsed ? (*r.collapsed ? "true" : "false") : "") << '\n';
  }
}

void save_metrics_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics log for writing: " + path.string());
  write_metrics_csv(out, rows);
  if (!out) throw IoError("failed writing metrics log: " + path.string());
}

std::vector<TrainLogRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw IoError("metrics log has an unexpected header");
  std::vector<TrainLogRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw IoError("metrics log line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      TrainLogRow r;
      r.epoch = std::stoi(f[0]);
      r.iter = std::stol(f[1]);
      r.l_svdd = std::stod(f[2]);
      r.l_reg = parse_opt(f[3]);
      r.c_t = std::stod(f[4]);
      r.radius = parse_opt(f[5]);
      r.threshold = parse_opt(f[6]);
      r.collapse_metric = parse_opt(f[7]);
      r.val_auc = parse_opt(f[8]);
      if (!f[9].empty()) r.collapsed = f[9] == "true";
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("metrics log line " + std::to_string(lineno) + " is malformed");
    }
  }
  return rows;
}

std::vector<TrainLogRow> load_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log: " + path.string());
  return parse_metrics_csv(in);
}

}  // namespace svddlab
