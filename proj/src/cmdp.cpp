#include "evo/cmdp.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "evo/error.hpp"

namespace evo {

void validate(const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw InvalidInput("trajectory is empty");
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    const auto& step = trajectory.steps[t];
    if (!(step.cost >= 0.0)) throw InvalidInput("negative cost at step " + std::to_string(t));
    if (!std::isfinite(step.log_prob))
      throw InvalidInput("non-finite log_prob at step " + std::to_string(t));
    if (step.done && t + 1 != trajectory.steps.size())
      throw InvalidInput("done flag before the final step");
  }
}

namespace cmdp {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in (0, 1]");
}

}  // namespace

double discounted_return(std::span<const double> values, double gamma) {
  check_gamma(gamma);
  if (values.empty()) throw InvalidInput("discounted_return of an empty sequence");
  // Horner form, back to front.
  double total = 0.0;
  for (auto it = values.rbegin(); it != values.rend(); ++it) total = *it + gamma * total;
  return total;
}

std::vector<double> channel_values(const Trajectory& trajectory, Channel channel) {
  std::vector<double> out;
  out.reserve(trajectory.steps.size());
  for (const auto& step : trajectory.steps)
    out.push_back(channel == Channel::reward ? step.reward : step.cost);
  return out;
}

double cumulative_cost(const Trajectory& trajectory, double gamma) {
  const auto costs = channel_values(trajectory, Channel::cost);
  return discounted_return(costs, gamma);
}

std::vector<double> gae_advantages(std::span<const double> signal, std::span<const double> values,
                                   double gamma, double lam) {
  check_gamma(gamma);
  if (lam < 0.0 || lam > 1.0) throw InvalidInput("gae lambda must lie in [0, 1]");
  if (signal.empty()) throw InvalidInput("gae of an empty trajectory");
  if (values.size() != signal.size() + 1)
    throw InvalidInput("gae needs one value per step plus a bootstrap value");

  std::vector<double> advantages(signal.size());
  double running = 0.0;
  for (std::size_t i = signal.size(); i-- > 0;) {
    const double delta = signal[i] + gamma * values[i + 1] - values[i];
    running = delta + gamma * lam * running;
    advantages[i] = running;
  }
  return advantages;
}

std::vector<double> gae_advantages(const Trajectory& trajectory, std::span<const double> values,
                                   double gamma, double lam, Channel channel) {
  const auto signal = channel_values(trajectory, channel);
  return gae_advantages(signal, values, gamma, lam);
}

std::vector<double> discounted_returns_to_go(std::span<const double> signal, double bootstrap,
                                             double gamma) {
  std::vector<double> out(signal.size());
  double running = bootstrap;
  for (std::size_t i = signal.size(); i-- > 0;) {
    running = signal[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

void normalize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(var / n);
  for (double& v : values) v = std_dev > 1e-12 ? (v - mean) / std_dev : 0.0;
}

ProcessedBatch process_batch(std::span<const Trajectory> trajectories,
                             std::span<const TrajectoryValues> values, double gamma,
                             double gae_lambda) {
  if (trajectories.size() != values.size())
    throw InvalidInput("process_batch: one value set per trajectory required");
  ProcessedBatch batch;
  batch.gamma = gamma;
  batch.gae_lambda = gae_lambda;

  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& traj = trajectories[k];
    validate(traj);
    const auto rewards = channel_values(traj, Channel::reward);
    const auto costs = channel_values(traj, Channel::cost);

    const auto a_r = gae_advantages(rewards, values[k].reward, gamma, gae_lambda);
    const auto a_c = gae_advantages(costs, values[k].cost, gamma, gae_lambda);
    const auto r_ret = discounted_returns_to_go(rewards, values[k].reward.back(), gamma);
    const auto c_ret = discounted_returns_to_go(costs, values[k].cost.back(), gamma);

    batch.reward_advantages.insert(batch.reward_advantages.end(), a_r.begin(), a_r.end());
    batch.cost_advantages.insert(batch.cost_advantages.end(), a_c.begin(), a_c.end());
    batch.reward_returns.insert(batch.reward_returns.end(), r_ret.begin(), r_ret.end());
    batch.cost_returns.insert(batch.cost_returns.end(), c_ret.begin(), c_ret.end());
    batch.cumulative_costs.push_back(discounted_return(costs, gamma));
    batch.episode_returns.push_back(std::accumulate(rewards.begin(), rewards.end(), 0.0));
  }
  normalize(batch.reward_advantages);
  return batch;
}

}  // namespace cmdp
}  // namespace evo
