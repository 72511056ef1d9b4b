#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evo/cmdp.hpp"
#include "evo/rng.hpp"

namespace evo::envs {

struct DiscreteActions {
  int n = 0;
};

struct ContinuousActions {
  std::size_t dim = 0;
  std::vector<double> low;
  std::vector<double> high;
};

using ActionKind = std::variant<DiscreteActions, ContinuousActions>;

struct EnvSpec {
  std::string id;
  std::size_t observation_dim = 0;
  ActionKind action_kind;
  int max_episode_len = 0;
  double cost_limit_default = 25.0;
  double reward_bound = 1.0;  // |reward| never exceeds this
  std::vector<double> observation_low;
  std::vector<double> observation_high;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;       // reached a terminal state
  bool truncated = false;  // hit max_episode_len without terminating
};

// Single-owner environment. Evolution is a pure function of the reset seed and
// the action sequence.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;

  Observation reset(std::uint64_t seed);
  StepResult step(const Action& action);

  int elapsed_steps() const { return elapsed_; }
  bool finished() const { return finished_; }

 protected:
  virtual Observation do_reset() = 0;
  virtual StepResult do_step(const Action& action) = 0;

  Rng rng_;

 private:
  void check_action(const Action& action) const;

  int elapsed_ = 0;
  bool started_ = false;
  bool finished_ = false;
};

// Optional knobs shared by the bundled environments. Zero/negative values keep
// each environment's own default.
struct EnvOptions {
  double shaping_weight = 1.0;
  int grid_size = 8;
  std::uint64_t layout_seed = 0;
  double slip_prob = 0.1;
  int max_episode_len = 0;
};

// N x N grid. The goal sits at a layout-seeded interior cell and the eight
// hazards occupy its surrounding ring. Each step pays
// shaping_weight * exp(1 - dist) with dist the Chebyshev distance to the goal,
// so ring cells pay the most; entering the goal pays +1 and ends the episode.
// Entering a hazard costs 1.
// With probability slip_prob the chosen move is replaced by a uniform one.
class HazardGridworld final : public Environment {
 public:
  enum Move : int { stay = 0, up = 1, down = 2, left = 3, right = 4 };
  struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
  };

  explicit HazardGridworld(const EnvOptions& options = {});

  const EnvSpec& spec() const override { return spec_; }

  const std::vector<Cell>& hazards() const { return hazards_; }
  Cell goal() const { return goal_; }
  Cell agent() const { return agent_; }
  // Support of the reset distribution; each start cell is equally likely.
  const std::vector<Cell>& start_cells() const { return starts_; }
  bool is_hazard(Cell c) const;

  // Test hook: place the agent without consuming randomness.
  void set_agent(Cell c) { agent_ = c; }
  void set_slip_prob(double p) { slip_prob_ = p; }

 protected:
  Observation do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  Observation observe() const;
  int distance_to_goal(Cell c) const;

  EnvSpec spec_;
  int n_;
  double shaping_weight_;
  double slip_prob_;
  Cell goal_;
  Cell agent_;
  std::vector<Cell> hazards_;
  std::vector<Cell> starts_;
};

// Planar point with velocity actions in [-1, 1]^2. Reward is tangential speed
// around the origin damped by the distance from the target circle; cost 1 when
// |x| leaves the strip [-x_limit, x_limit].
class PointCircle final : public Environment {
 public:
  explicit PointCircle(const EnvOptions& options = {});

  const EnvSpec& spec() const override { return spec_; }

  static constexpr double circle_radius = 1.0;
  static constexpr double x_limit = 0.7;
  static constexpr double arena = 2.0;
  static constexpr double dt = 0.1;

 protected:
  Observation do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  Observation observe() const;

  EnvSpec spec_;
  double shaping_weight_;
  double x_ = 0.0, y_ = 0.0, vx_ = 0.0, vy_ = 0.0;
};

// One-dimensional chain. The action is the commanded velocity in
// [-max_speed, max_speed]; reward equals the velocity and cost is 1 whenever
// |velocity| exceeds speed_limit.
class VelocityChain final : public Environment {
 public:
  explicit VelocityChain(const EnvOptions& options = {});

  const EnvSpec& spec() const override { return spec_; }

  static constexpr double max_speed = 2.0;
  static constexpr double speed_limit = 1.0;
  static constexpr double dt = 0.05;
  static constexpr double chain_length = 10.0;

 protected:
  Observation do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  Observation observe() const;

  EnvSpec spec_;
  double position_ = 0.0;
  double velocity_ = 0.0;
};

std::vector<std::string> environment_ids();

// "hazard-grid", "point-circle", "velocity-chain".
std::unique_ptr<Environment> make_environment(std::string_view id, const EnvOptions& options = {});

}  // namespace evo::envs
