#include "evo/replay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evo/error.hpp"

namespace evo::replay {

RatioMode parse_ratio_mode(std::string_view name) {
  if (name == "literal") return RatioMode::literal;
  if (name == "product") return RatioMode::product;
  throw InvalidInput("unknown is_ratio_mode '" + std::string(name) + "'");
}

namespace {
double clipped_ratio(double log_ratio, const ReweighOptions& o) {
  return std::clamp(std::exp(log_ratio), o.w_min, o.w_max);
}

double omega(const evt::GpdParams& gpd, double value) {
  const double z = value - gpd.threshold;
  if (!(z > 0.0)) return 0.0;
  if (z >= gpd.support_end()) return 1.0;
  return evt::gpd_cdf(gpd, z);
}
}  // namespace

double trajectory_weight(const TrajectoryLog& log, const LogProbFn& log_prob, const ReweighOptions& options) {
  if (log.states.size() != log.actions.size() || log.states.size() != log.log_probs.size())
    throw InvalidInput("trajectory log arrays disagree in length");
  double sum = 0.0;
  for (std::size_t t = 0; t < log.states.size(); ++t) sum += log_prob(log.states[t], log.actions[t]) - log.log_probs[t];
  return clipped_ratio(sum, options);
}

Reweighed importance_reweigh(const ReplayEntry& entry, const LogProbFn& log_prob, const ReweighOptions& options) {
  const double w = clipped_ratio(log_prob(entry.state, entry.action) - entry.log_prob_old, options);
  double big_w = w;
  if (options.mode == RatioMode::product) {
    if (!entry.trajectory) throw InvalidInput("product ratio mode needs the source trajectory");
    big_w = trajectory_weight(*entry.trajectory, log_prob, options);
  }
  return {w * entry.reward_advantage, big_w * entry.trajectory_cost};
}

double priority(double reward_advantage, double trajectory_cost, const evt::TailModel& model, double p_floor) {
  const double p = omega(model.reward_gpd, reward_advantage) + omega(model.cost_gpd, trajectory_cost);
  return std::max(p, p_floor);
}

double priority(const ReplayEntry& entry, const evt::TailModel& model, double p_floor) {
  return priority(entry.reward_advantage, entry.trajectory_cost, model, p_floor);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("replay capacity must be positive");
}

void ReplayBuffer::touch() {
  if (++mutations_ % 1024 == 0) total_ = recomputed_total();
}

double ReplayBuffer::recomputed_total() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.priority;
  return s;
}

void ReplayBuffer::push(ReplayEntry entry) {
  if (!std::isfinite(entry.priority) || entry.priority < 0.0) throw InvalidInput("priority must be finite and >= 0");
  if (!std::isfinite(entry.log_prob_old)) throw InvalidInput("log_prob_old must be finite");
  if (entries_.size() == capacity_) {
    total_ -= entries_.front().priority;
    entries_.pop_front();
  }
  total_ += entry.priority;
  entries_.push_back(std::move(entry));
  touch();
}

void ReplayBuffer::evict_older_than(std::uint64_t current_epoch, std::uint64_t k_age) {
  const auto stale = [&](const ReplayEntry& e) { return e.epoch_id + k_age < current_epoch; };
  const auto before = entries_.size();
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(), stale), entries_.end());
  if (entries_.size() != before) {
    total_ = recomputed_total();
    ++mutations_;
  }
}

void ReplayBuffer::set_priority(std::size_t index, double p) {
  if (!std::isfinite(p) || p < 0.0) throw InvalidInput("priority must be finite and >= 0");
  auto& e = entries_.at(index);
  total_ += p - e.priority;
  e.priority = p;
  touch();
}

void ReplayBuffer::clear() {
  entries_.clear();
  total_ = 0.0;
}

std::vector<double> replay_probabilities(const ReplayBuffer& buffer) {
  if (buffer.empty()) throw InvalidInput("replay buffer is empty");
  const double total = buffer.recomputed_total();
  if (!(total > 0.0)) throw InvalidInput("replay priorities sum to zero");
  std::vector<double> p;
  p.reserve(buffer.size());
  for (const auto& e : buffer.entries()) p.push_back(e.priority / total);
  return p;
}

std::vector<std::size_t> sample_indices(const ReplayBuffer& buffer, Rng& rng, int batch_size) {
  if (batch_size <= 0) throw InvalidInput("batch_size must be positive");
  if (buffer.empty()) throw InvalidInput("replay buffer is empty");
  std::vector<double> cumulative;
  cumulative.reserve(buffer.size());
  double acc = 0.0;
  for (const auto& e : buffer.entries()) cumulative.push_back(acc += e.priority);
  if (!(acc > 0.0)) throw InvalidInput("replay priorities sum to zero");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const double target = uniform01(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    out.push_back(static_cast<std::size_t>(it - cumulative.begin()));
  }
  return out;
}

std::vector<ReplayEntry> sample_batch(const ReplayBuffer& buffer, Rng& rng, int batch_size) {
  std::vector<ReplayEntry> out;
  for (std::size_t i : sample_indices(buffer, rng, batch_size)) out.push_back(buffer[i]);
  return out;
}

std::vector<double> augment_excesses(std::span<const double> on_policy, std::span<const double> off_policy,
                                     double threshold) {
  auto out = evt::extract_peaks(on_policy, threshold);
  const auto extra = evt::extract_peaks(off_policy, threshold);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

}  // namespace evo::replay
