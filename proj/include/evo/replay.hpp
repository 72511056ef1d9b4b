#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "evo/cmdp.hpp"
#include "evo/evt.hpp"
#include "evo/rng.hpp"

namespace evo::replay {

// States, actions and generation-time log-probs of the source trajectory,
// shared by all entries cut from it.
struct TrajectoryLog {
  std::vector<Observation> states;
  std::vector<Action> actions;
  std::vector<double> log_probs;
};

struct ReplayEntry {
  Observation state;
  Action action;
  double reward_advantage = 0.0;  // A_R
  double trajectory_cost = 0.0;   // C of the source trajectory
  double log_prob_old = 0.0;
  std::uint64_t epoch_id = 0;
  double priority = 1e-3;
  std::shared_ptr<const TrajectoryLog> trajectory;
};

enum class RatioMode { literal, product };
RatioMode parse_ratio_mode(std::string_view name);

struct ReweighOptions {
  RatioMode mode = RatioMode::product;
  double w_min = 0.1;
  double w_max = 10.0;
};

using LogProbFn = std::function<double(const Observation&, const Action&)>;

struct Reweighed {
  double reward_advantage = 0.0;
  double trajectory_cost = 0.0;
};

// clip(pi/pi_0) * A_R, and C scaled by the clipped single-step ratio (literal)
// or by the clipped product of per-step ratios over the source trajectory.
Reweighed importance_reweigh(const ReplayEntry& entry, const LogProbFn& log_prob,
                             const ReweighOptions& options = {});

// Clipped product of per-step ratios over a whole trajectory log.
double trajectory_weight(const TrajectoryLog& log, const LogProbFn& log_prob, const ReweighOptions& options = {});

// omega_r + omega_c, floored at p_floor. omega is the GPD CDF of the excess
// over the corresponding boundary, 0 at or below it.
double priority(double reward_advantage, double trajectory_cost, const evt::TailModel& model, double p_floor = 1e-3);
double priority(const ReplayEntry& entry, const evt::TailModel& model, double p_floor = 1e-3);

// Bounded FIFO with a running priority sum.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(ReplayEntry entry);
  // Drops entries with epoch_id + k_age < current_epoch.
  void evict_older_than(std::uint64_t current_epoch, std::uint64_t k_age);
  void set_priority(std::size_t index, double priority);
  void clear();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::deque<ReplayEntry>& entries() const { return entries_; }

  double total_priority() const { return total_; }
  double recomputed_total() const;

 private:
  void touch();

  std::size_t capacity_;
  std::deque<ReplayEntry> entries_;
  double total_ = 0.0;
  std::size_t mutations_ = 0;
};

// priority_i / sum(priority). Throws InvalidInput when empty or all zero.
std::vector<double> replay_probabilities(const ReplayBuffer& buffer);

// Indices drawn with replacement according to replay_probabilities.
std::vector<std::size_t> sample_indices(const ReplayBuffer& buffer, Rng& rng, int batch_size);
std::vector<ReplayEntry> sample_batch(const ReplayBuffer& buffer, Rng& rng, int batch_size);

// Peaks of on-policy samples followed by peaks of reweighted off-policy samples.
std::vector<double> augment_excesses(std::span<const double> on_policy, std::span<const double> off_policy,
                                     double threshold);

}  // namespace evo::replay
