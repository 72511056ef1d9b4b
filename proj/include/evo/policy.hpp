#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "evo/cmdp.hpp"
#include "evo/rng.hpp"

namespace evo::policy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Head : std::uint32_t { categorical = 0, gaussian = 1, value = 2 };

// Two tanh hidden layers of `hidden` units. out_dim is the number of logits
// (categorical), the action dimension (gaussian) or 1 (value). Gaussian heads
// carry out_dim state-independent log standard deviations after the weights.
struct Architecture {
  Head head = Head::categorical;
  std::size_t obs_dim = 0;
  std::size_t out_dim = 0;
  std::size_t hidden = 64;

  std::size_t parameter_count() const;
  bool operator==(const Architecture&) const = default;
};

struct PolicyParams {
  Architecture arch;
  VectorXd theta;
};

struct ValueParams {
  Architecture arch;
  VectorXd theta;
};

// Scaled-uniform init, gain 1 on hidden layers and 0.01 on the policy output.
PolicyParams init_policy(const Architecture& arch, std::uint64_t seed, double log_std_init = -0.6931471805599453);
ValueParams init_value(std::size_t obs_dim, std::uint64_t seed, std::size_t hidden = 64);

// Column-per-sample layouts.
MatrixXd stack_states(std::span<const Observation> states);

struct ActionBatch {
  std::vector<int> indices;  // categorical
  MatrixXd values;           // gaussian, dim x B

  std::size_t size() const { return indices.empty() ? static_cast<std::size_t>(values.cols()) : indices.size(); }
};

ActionBatch stack_actions(std::span<const Action> actions, const Architecture& arch);

// Logits or means, out_dim x B.
MatrixXd policy_outputs(const PolicyParams& params, const MatrixXd& states);
VectorXd log_probs(const PolicyParams& params, const MatrixXd& states, const ActionBatch& actions);

double policy_log_prob(const PolicyParams& params, std::span<const double> state, const Action& action);

struct ActionBounds {
  std::vector<double> low;
  std::vector<double> high;
};

struct SampledAction {
  Action action;  // unclamped draw
  double log_prob = 0.0;
};

SampledAction sample_action(const PolicyParams& params, std::span<const double> state, Rng& rng);

// Draw from the policy; continuous draws are clamped to `bounds` when given.
Action policy_sample(const PolicyParams& params, std::span<const double> state, Rng& rng,
                     const std::optional<ActionBounds>& bounds = std::nullopt);

// Argmax for categorical heads, the mean for gaussian heads.
Action policy_mode(const PolicyParams& params, std::span<const double> state,
                   const std::optional<ActionBounds>& bounds = std::nullopt);

// On-policy samples for the trust-region step.
struct PolicyBatch {
  MatrixXd states;
  ActionBatch actions;
  VectorXd old_log_probs;
  VectorXd reward_advantages;
  VectorXd cost_advantages;
  double gamma = 0.99;
};

// L_R(theta) = mean ratio * A_R and L_C(theta) = mean ratio * A_C / (1 - gamma),
// ratio = pi_theta / pi_old.
double surrogate_reward(const PolicyParams& params, const PolicyBatch& batch);
double surrogate_cost(const PolicyParams& params, const PolicyBatch& batch);
VectorXd surrogate_gradient(const PolicyParams& params, const PolicyBatch& batch, cmdp::Channel channel);

struct SurrogateGradients {
  VectorXd g;
  VectorXd g_c;
};

// Gradients of both surrogates at the sampling parameters.
SurrogateGradients surrogate_gradients(const PolicyParams& theta_k, const PolicyBatch& batch);

// Mean over states of KL(pi_theta || pi_theta_k).
double kl_divergence(const PolicyParams& params, const PolicyParams& reference, const MatrixXd& states);
VectorXd kl_gradient(const PolicyParams& params, const PolicyParams& reference, const MatrixXd& states);

// (H + damping I) v with H the Hessian of the mean KL at theta_k, via one
// forward-mode and one reverse-mode pass.
VectorXd fisher_vector_product(const PolicyParams& theta_k, const MatrixXd& states, const VectorXd& v,
                               double damping);

// Same product with the forward pass at theta_k computed once; copies share it.
class FisherOperator {
 public:
  FisherOperator(PolicyParams theta_k, MatrixXd states, double damping);
  VectorXd operator()(const VectorXd& v) const;

 private:
  struct Cache;
  PolicyParams theta_k_;
  double damping_;
  std::shared_ptr<const Cache> cache_;
};

VectorXd value_predict(const ValueParams& params, const MatrixXd& states);
double value_loss(const ValueParams& params, const MatrixXd& states, const VectorXd& targets);
VectorXd value_loss_gradient(const ValueParams& params, const MatrixXd& states, const VectorXd& targets);

struct ValueUpdateOptions {
  double lr = 1e-3;
  int iterations = 40;        // Adam steps
  std::size_t minibatch = 0;  // 0 means full batch
  std::uint64_t seed = 0;     // minibatch order
  int max_halvings = 5;
};

// Adam on mean squared error, cycling through a seeded shuffle of the data
// in minibatches. If the final full-batch loss is worse than the
// initial one the update is retried with half the rate; after max_halvings
// the input parameters are returned.
ValueParams value_update(const ValueParams& params, const MatrixXd& states, const VectorXd& targets,
                         const ValueUpdateOptions& options);

}  // namespace evo::policy
