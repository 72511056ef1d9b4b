#include "evo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evo/error.hpp"

namespace evo {

namespace fs = std::filesystem;

double ratio_metric(double mean_return, double violation_rate, double eps_stability) {
  if (!(eps_stability > 0.0)) throw DomainError("ratio_metric: eps_stability must be positive");
  return mean_return / (violation_rate + eps_stability);
}

namespace {

RunSummary read_run(const fs::path& csv, const std::string& name) {
  std::ifstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(csv.string() + ": empty metrics file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  const auto column = [&](const char* key) {
    const auto it = std::find(header.begin(), header.end(), key);
    if (it == header.end()) throw InvalidInput(csv.string() + ": missing column " + key);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ret_col = column("mean_return");
  const std::size_t vio_col = column("violation_rate");
  RunSummary s;
  s.name = name;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size()) throw InvalidInput(csv.string() + ": ragged row");
    s.mean_return += std::stod(cells[ret_col]);
    s.violation_rate += std::stod(cells[vio_col]);
    ++s.epochs;
  }
  if (s.epochs > 0) {
    s.mean_return /= static_cast<double>(s.epochs);
    s.violation_rate /= static_cast<double>(s.epochs);
  }
  return s;
}

}  // namespace

std::vector<RunSummary> summarize_runs(const fs::path& runs_dir, double eps_stability) {
  if (!fs::is_directory(runs_dir)) throw InvalidInput(runs_dir.string() + " is not a directory");
  std::vector<RunSummary> rows;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    const auto csv = entry.path() / "metrics.csv";
    if (entry.is_directory() && fs::exists(csv)) rows.push_back(read_run(csv, entry.path().filename().string()));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  double scale = 0.0;
  for (auto& r : rows) {
    r.ratio = ratio_metric(r.mean_return, r.violation_rate, eps_stability);
    scale = std::max(scale, std::abs(r.ratio));
  }
  for (auto& r : rows) r.normalized_ratio = scale > 0.0 ? r.ratio / scale : 0.0;
  return rows;
}

std::string format_report(const std::vector<RunSummary>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-32s %7s %14s %14s %14s %10s\n", "run", "epochs", "mean_return", "violation_rate",
                "ratio", "normalized");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-32s %7lld %14.6g %14.6g %14.6g %10.4f\n", r.name.c_str(), r.epochs,
                  r.mean_return, r.violation_rate, r.ratio, r.normalized_ratio);
    out << buf;
  }
  return out.str();
}

}  // namespace evo
