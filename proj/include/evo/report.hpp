#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evo {

// mean_return / (violation_rate + eps_stability).
double ratio_metric(double mean_return, double violation_rate, double eps_stability);

struct RunSummary {
  std::string name;
  long long epochs = 0;
  double mean_return = 0.0;     // averaged over all logged epochs
  double violation_rate = 0.0;  // averaged over all logged epochs
  double ratio = 0.0;
  double normalized_ratio = 0.0;  // ratio / max |ratio| over the table
};

// One row per subdirectory of `runs_dir` holding a metrics.csv, sorted by name.
std::vector<RunSummary> summarize_runs(const std::filesystem::path& runs_dir, double eps_stability);
std::string format_report(const std::vector<RunSummary>& rows);

}  // namespace evo
