#include "evo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evo/error.hpp"

namespace evo::envs {

Observation Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  elapsed_ = 0;
  started_ = true;
  finished_ = false;
  return do_reset();
}

void Environment::check_action(const Action& action) const {
  const auto& kind = spec().action_kind;
  if (const auto* d = std::get_if<DiscreteActions>(&kind)) {
    const auto* idx = std::get_if<int>(&action);
    if (idx == nullptr) throw InvalidInput(spec().id + ": expected a discrete action");
    if (*idx < 0 || *idx >= d->n) throw InvalidInput(spec().id + ": action index out of range");
    return;
  }
  const auto& c = std::get<ContinuousActions>(kind);
  const auto* vec = std::get_if<std::vector<double>>(&action);
  if (vec == nullptr) throw InvalidInput(spec().id + ": expected a continuous action");
  if (vec->size() != c.dim) throw InvalidInput(spec().id + ": action has wrong dimension");
  for (double a : *vec)
    if (!std::isfinite(a)) throw InvalidInput(spec().id + ": non-finite action");
}

StepResult Environment::step(const Action& action) {
  if (!started_) throw UsageError(spec().id + ": step before reset");
  if (finished_) throw UsageError(spec().id + ": step after the episode ended");
  check_action(action);
  StepResult result = do_step(action);
  ++elapsed_;
  if (!result.done && elapsed_ >= spec().max_episode_len) result.truncated = true;
  finished_ = result.done || result.truncated;
  return result;
}

// ---------------------------------------------------------------------------
// HazardGridworld

HazardGridworld::HazardGridworld(const EnvOptions& options)
    : n_(options.grid_size), shaping_weight_(options.shaping_weight),
      slip_prob_(options.slip_prob) {
  if (n_ < 5) throw InvalidInput("hazard-grid: grid_size must be at least 5");
  if (slip_prob_ < 0.0 || slip_prob_ > 1.0) throw InvalidInput("hazard-grid: slip_prob outside [0, 1]");

  Rng layout(derive_seed(options.layout_seed, 0x6872646772ULL));
  const int span = n_ - 4;  // goal in [2, n-3] keeps the hazard ring off the border
  goal_ = {2 + static_cast<int>(uniform_index(layout, static_cast<std::size_t>(span))),
           2 + static_cast<int>(uniform_index(layout, static_cast<std::size_t>(span)))};
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx != 0 || dy != 0) hazards_.push_back({goal_.x + dx, goal_.y + dy});
  starts_ = {{0, 0}, {n_ - 1, 0}, {0, n_ - 1}, {n_ - 1, n_ - 1}};
  agent_ = starts_.front();

  spec_.id = "hazard-grid";
  spec_.observation_dim = 6;
  spec_.action_kind = DiscreteActions{5};
  spec_.max_episode_len = options.max_episode_len > 0 ? options.max_episode_len : 100;
  spec_.cost_limit_default = 25.0;
  spec_.reward_bound = std::abs(shaping_weight_) + 1.0;
  spec_.observation_low = {0.0, 0.0, -1.0, -1.0, -1.0, -1.0};
  spec_.observation_high = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
}

bool HazardGridworld::is_hazard(Cell c) const {
  return std::find(hazards_.begin(), hazards_.end(), c) != hazards_.end();
}

int HazardGridworld::distance_to_goal(Cell c) const {
  return std::max(std::abs(c.x - goal_.x), std::abs(c.y - goal_.y));
}

Observation HazardGridworld::observe() const {
  const double scale = 1.0 / (n_ - 1);
  Cell nearest = hazards_.front();
  int best = std::numeric_limits<int>::max();
  for (const auto& h : hazards_) {
    const int d = std::abs(h.x - agent_.x) + std::abs(h.y - agent_.y);
    if (d < best) {
      best = d;
      nearest = h;
    }
  }
  return {agent_.x * scale,
          agent_.y * scale,
          (goal_.x - agent_.x) * scale,
          (goal_.y - agent_.y) * scale,
          (nearest.x - agent_.x) * scale,
          (nearest.y - agent_.y) * scale};
}

Observation HazardGridworld::do_reset() {
  agent_ = starts_[uniform_index(rng_, starts_.size())];
  return observe();
}

StepResult HazardGridworld::do_step(const Action& action) {
  int move = std::get<int>(action);
  // Slip draw is made every step so the RNG stream does not depend on actions.
  const double slip_draw = uniform01(rng_);
  const auto slip_move = static_cast<int>(uniform_index(rng_, 5));
  if (slip_draw < slip_prob_) move = slip_move;

  Cell next = agent_;
  switch (move) {
    case up: next.y += 1; break;
    case down: next.y -= 1; break;
    case left: next.x -= 1; break;
    case right: next.x += 1; break;
    default: break;
  }
  next.x = std::clamp(next.x, 0, n_ - 1);
  next.y = std::clamp(next.y, 0, n_ - 1);
  agent_ = next;

  StepResult result;
  result.cost = is_hazard(agent_) ? 1.0 : 0.0;
  if (agent_ == goal_) {
    result.reward = 1.0;
    result.done = true;
  } else {
    result.reward = shaping_weight_ * std::exp(1.0 - distance_to_goal(agent_));
  }
  result.observation = observe();
  return result;
}

// ---------------------------------------------------------------------------
// PointCircle

PointCircle::PointCircle(const EnvOptions& options) : shaping_weight_(options.shaping_weight) {
  spec_.id = "point-circle";
  spec_.observation_dim = 4;
  spec_.action_kind = ContinuousActions{2, {-1.0, -1.0}, {1.0, 1.0}};
  spec_.max_episode_len = options.max_episode_len > 0 ? options.max_episode_len : 200;
  spec_.cost_limit_default = 25.0;
  // |v x r| <= |v||r| <= sqrt(2) * arena * sqrt(2)
  spec_.reward_bound = std::abs(shaping_weight_) * 2.0 * arena / circle_radius;
  spec_.observation_low = {-1.0, -1.0, -1.0, -1.0};
  spec_.observation_high = {1.0, 1.0, 1.0, 1.0};
}

Observation PointCircle::observe() const {
  return {x_ / arena, y_ / arena, vx_ / std::sqrt(2.0), vy_ / std::sqrt(2.0)};
}

Observation PointCircle::do_reset() {
  x_ = 0.2 * (uniform01(rng_) - 0.5);
  y_ = 0.2 * (uniform01(rng_) - 0.5);
  vx_ = vy_ = 0.0;
  return observe();
}

StepResult PointCircle::do_step(const Action& action) {
  const auto& a = std::get<std::vector<double>>(action);
  vx_ = std::clamp(a[0], -1.0, 1.0);
  vy_ = std::clamp(a[1], -1.0, 1.0);
  x_ = std::clamp(x_ + dt * vx_, -arena, arena);
  y_ = std::clamp(y_ + dt * vy_, -arena, arena);

  StepResult result;
  const double radius = std::hypot(x_, y_);
  const double tangential = (-vx_ * y_ + vy_ * x_) / circle_radius;
  result.reward = shaping_weight_ * tangential / (1.0 + std::abs(radius - circle_radius));
  result.cost = std::abs(x_) > x_limit ? 1.0 : 0.0;
  result.observation = observe();
  return result;
}

// ---------------------------------------------------------------------------
// VelocityChain

VelocityChain::VelocityChain(const EnvOptions& options) {
  spec_.id = "velocity-chain";
  spec_.observation_dim = 2;
  spec_.action_kind = ContinuousActions{1, {-max_speed}, {max_speed}};
  spec_.max_episode_len = options.max_episode_len > 0 ? options.max_episode_len : 200;
  spec_.cost_limit_default = 25.0;
  spec_.reward_bound = max_speed;
  spec_.observation_low = {-1.0, -1.0};
  spec_.observation_high = {1.0, 1.0};
}

Observation VelocityChain::observe() const {
  return {std::clamp(position_ / chain_length, -1.0, 1.0), velocity_ / max_speed};
}

Observation VelocityChain::do_reset() {
  position_ = 0.1 * (uniform01(rng_) - 0.5);
  velocity_ = 0.0;
  return observe();
}

StepResult VelocityChain::do_step(const Action& action) {
  const auto& a = std::get<std::vector<double>>(action);
  velocity_ = std::clamp(a[0], -max_speed, max_speed);
  position_ += dt * velocity_;

  StepResult result;
  result.reward = velocity_;
  result.cost = std::abs(velocity_) > speed_limit ? 1.0 : 0.0;
  result.observation = observe();
  return result;
}

// ---------------------------------------------------------------------------

std::vector<std::string> environment_ids() {
  return {"hazard-grid", "point-circle", "velocity-chain"};
}

std::unique_ptr<Environment> make_environment(std::string_view id, const EnvOptions& options) {
  if (id == "hazard-grid") return std::make_unique<HazardGridworld>(options);
  if (id == "point-circle") return std::make_unique<PointCircle>(options);
  if (id == "velocity-chain") return std::make_unique<VelocityChain>(options);
  throw InvalidInput("unknown environment id '" + std::string(id) + "'");
}

}  // namespace evo::envs
