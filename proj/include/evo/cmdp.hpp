#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace evo {

using Observation = std::vector<double>;

// Discrete environments take an action index, continuous ones a real vector.
using Action = std::variant<int, std::vector<double>>;

struct StepRecord {
  Observation state;
  Action action;
  double reward = 0.0;
  double cost = 0.0;  // >= 0
  double log_prob = 0.0;
  bool done = false;
};

// One episode. `final_state` is the observation after the last step, used to
// bootstrap the value of a trajectory cut off by the episode length limit.
struct Trajectory {
  std::vector<StepRecord> steps;
  Observation final_state;

  bool terminated() const { return !steps.empty() && steps.back().done; }
  std::size_t size() const { return steps.size(); }
};

// Throws InvalidInput when the trajectory breaks the StepRecord/Trajectory invariants.
void validate(const Trajectory& trajectory);

namespace cmdp {

enum class Channel { reward, cost };

// Sum_t gamma^t * values[t]. gamma in (0, 1].
double discounted_return(std::span<const double> values, double gamma);

double cumulative_cost(const Trajectory& trajectory, double gamma);

std::vector<double> channel_values(const Trajectory& trajectory, Channel channel);

// Generalized advantage estimation. `values` has one entry per step plus the
// bootstrap value for the state after the last step (0 for a terminal step).
std::vector<double> gae_advantages(std::span<const double> signal, std::span<const double> values,
                                   double gamma, double lam);

std::vector<double> gae_advantages(const Trajectory& trajectory, std::span<const double> values,
                                   double gamma, double lam, Channel channel = Channel::reward);

// Discounted rewards-to-go with the bootstrap value folded into the tail.
std::vector<double> discounted_returns_to_go(std::span<const double> signal, double bootstrap,
                                             double gamma);

// Per-trajectory value predictions: steps.size() + 1 entries each.
struct TrajectoryValues {
  std::vector<double> reward;
  std::vector<double> cost;
};

// Flat per-step arrays over a set of trajectories, in trajectory order.
struct ProcessedBatch {
  std::vector<double> reward_advantages;  // normalized to zero mean, unit variance
  std::vector<double> cost_advantages;    // raw scale
  std::vector<double> reward_returns;
  std::vector<double> cost_returns;
  std::vector<double> cumulative_costs;  // one per trajectory
  std::vector<double> episode_returns;   // undiscounted reward sum, one per trajectory
  double gamma = 0.99;
  double gae_lambda = 0.95;

  std::size_t step_count() const { return reward_advantages.size(); }
};

ProcessedBatch process_batch(std::span<const Trajectory> trajectories,
                             std::span<const TrajectoryValues> values, double gamma,
                             double gae_lambda);

// In-place standardization; a constant input maps to zeros.
void normalize(std::vector<double>& values);

}  // namespace cmdp
}  // namespace evo
