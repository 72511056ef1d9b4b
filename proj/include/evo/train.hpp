#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evo/config.hpp"
#include "evo/envs.hpp"
#include "evo/policy.hpp"

namespace evo {

struct EpochMetrics {
  long long epoch = 0;
  double mean_return = 0.0;
  double mean_cost = 0.0;  // J_C, mean discounted cumulative cost
  double violation_rate = 0.0;
  double nu = 0.0;
  double mu_hat = 0.0;
  double xi = 0.0;
  double sigma = 0.0;
  double risk_boundary = 0.0;
  double nu0 = 0.0;
  double prob_bound = 0.0;
  double ks_gpd = 0.0;
  double ks_gauss = 0.0;
  double wall_time = 0.0;  // seconds; written to timing.csv, not metrics.csv
};

// Column order of metrics.csv.
std::string metrics_header();
std::string metrics_row(const EpochMetrics& m);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(long long epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  long long epoch() const { return epoch_; }

 private:
  long long epoch_;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  // Constraint value handed to the step solver each epoch.
  std::vector<double> constraint_values;
  std::vector<std::string> warnings;
  policy::PolicyParams policy;
  policy::ValueParams reward_value;
  policy::ValueParams cost_value;
};

policy::Architecture policy_architecture(const envs::EnvSpec& spec, std::size_t hidden);
envs::EnvOptions env_options(const TrainConfig& config);

// Runs the training loop. With a non-empty output_dir, writes
// <output_dir>/<name>/{config.txt, metrics.csv, timing.csv, warnings.log,
// checkpoint_XXXX.bin, checkpoint_final.bin}.
TrainResult train(const TrainConfig& config);

struct EvalOptions {
  double gamma = 0.99;
  double cost_limit = 25.0;
  envs::EnvOptions env;
};

struct EvalResult {
  double mean_return = 0.0;
  double mean_cost = 0.0;
  double violation_rate = 0.0;
  std::vector<double> episode_costs;
};

// Deterministic-action rollouts (argmax or mean).
EvalResult evaluate(const policy::PolicyParams& policy, std::string_view env_id, int episodes, std::uint64_t seed,
                    const EvalOptions& options = {});

}  // namespace evo
