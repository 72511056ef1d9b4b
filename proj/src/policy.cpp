#include "evo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "evo/error.hpp"

namespace evo::policy {

namespace {

using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using MatMap = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

const double log_two_pi = std::log(2.0 * std::numbers::pi);

struct Offsets {
  std::size_t w1, b1, w2, b2, w3, b3, log_std, end;
};

Offsets offsets(const Architecture& a) {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + a.hidden * a.obs_dim;
  o.w2 = o.b1 + a.hidden;
  o.b2 = o.w2 + a.hidden * a.hidden;
  o.w3 = o.b2 + a.hidden;
  o.b3 = o.w3 + a.out_dim * a.hidden;
  o.log_std = o.b3 + a.out_dim;
  o.end = o.log_std + (a.head == Head::gaussian ? a.out_dim : 0);
  return o;
}

template <typename Vec, typename Mat, typename VecOut>
struct LayerViews {
  Mat w1, w2, w3;
  VecOut b1, b2, b3, log_std;
};

auto const_views(const Architecture& a, const VectorXd& theta) {
  const Offsets o = offsets(a);
  const double* p = theta.data();
  const auto h = static_cast<Eigen::Index>(a.hidden);
  const auto in = static_cast<Eigen::Index>(a.obs_dim);
  const auto out = static_cast<Eigen::Index>(a.out_dim);
  return LayerViews<VectorXd, ConstMatMap, ConstVecMap>{
      ConstMatMap(p + o.w1, h, in),  ConstMatMap(p + o.w2, h, h),
      ConstMatMap(p + o.w3, out, h), ConstVecMap(p + o.b1, h),
      ConstVecMap(p + o.b2, h),      ConstVecMap(p + o.b3, out),
      ConstVecMap(p + o.log_std, a.head == Head::gaussian ? out : 0)};
}

auto mutable_views(const Architecture& a, VectorXd& theta) {
  const Offsets o = offsets(a);
  double* p = theta.data();
  const auto h = static_cast<Eigen::Index>(a.hidden);
  const auto in = static_cast<Eigen::Index>(a.obs_dim);
  const auto out = static_cast<Eigen::Index>(a.out_dim);
  return LayerViews<VectorXd, MatMap, VecMap>{
      MatMap(p + o.w1, h, in),  MatMap(p + o.w2, h, h),
      MatMap(p + o.w3, out, h), VecMap(p + o.b1, h),
      VecMap(p + o.b2, h),      VecMap(p + o.b3, out),
      VecMap(p + o.log_std, a.head == Head::gaussian ? out : 0)};
}

// tanh through the vectorized exp; saturates cleanly at +-1.
MatrixXd tanh_of(const MatrixXd& z) {
  return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

struct Forward {
  const MatrixXd* x;
  MatrixXd h1, h2, y;
};

void check_shapes(const Architecture& a, const VectorXd& theta, const MatrixXd& states) {
  if (static_cast<std::size_t>(theta.size()) != a.parameter_count())
    throw InvalidInput("parameter vector does not match the architecture");
  if (static_cast<std::size_t>(states.rows()) != a.obs_dim)
    throw InvalidInput("state dimension does not match the architecture");
}

Forward forward(const Architecture& a, const VectorXd& theta, const MatrixXd& states) {
  check_shapes(a, theta, states);
  const auto l = const_views(a, theta);
  Forward f{&states, {}, {}, {}};
  f.h1 = tanh_of((l.w1 * states).colwise() + l.b1);
  f.h2 = tanh_of((l.w2 * f.h1).colwise() + l.b2);
  f.y = (l.w3 * f.h2).colwise() + l.b3;
  return f;
}

// Reverse pass: gradient of sum_i <dy_i, y_i> with respect to the network
// weights. The log-std block is left at zero.
VectorXd backward(const Architecture& a, const VectorXd& theta, const Forward& f, const MatrixXd& dy) {
  const auto l = const_views(a, theta);
  VectorXd grad = VectorXd::Zero(theta.size());
  auto g = mutable_views(a, grad);
  g.w3.noalias() = dy * f.h2.transpose();
  g.b3 = dy.rowwise().sum();
  MatrixXd dz2 = (l.w3.transpose() * dy).cwiseProduct((1.0 - f.h2.array().square()).matrix());
  g.w2.noalias() = dz2 * f.h1.transpose();
  g.b2 = dz2.rowwise().sum();
  MatrixXd dz1 = (l.w2.transpose() * dz2).cwiseProduct((1.0 - f.h1.array().square()).matrix());
  g.w1.noalias() = dz1 * f.x->transpose();
  g.b1 = dz1.rowwise().sum();
  return grad;
}

// Forward-mode pass: directional derivative of the outputs along v.
MatrixXd jvp(const Architecture& a, const VectorXd& theta, const Forward& f, const VectorXd& v) {
  const auto l = const_views(a, theta);
  const auto d = const_views(a, v);
  MatrixXd dz1 = (d.w1 * *f.x).colwise() + d.b1;
  MatrixXd dh1 = dz1.cwiseProduct((1.0 - f.h1.array().square()).matrix());
  MatrixXd dz2 = ((d.w2 * f.h1 + l.w2 * dh1).colwise() + d.b2);
  MatrixXd dh2 = dz2.cwiseProduct((1.0 - f.h2.array().square()).matrix());
  return (d.w3 * f.h2 + l.w3 * dh2).colwise() + d.b3;
}

MatrixXd log_softmax(const MatrixXd& logits) {
  MatrixXd out = logits;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double m = out.col(j).maxCoeff();
    const double lse = m + std::log((out.col(j).array() - m).exp().sum());
    out.col(j).array() -= lse;
  }
  return out;
}

MatrixXd single_state(const Architecture& a, std::span<const double> state) {
  if (state.size() != a.obs_dim) throw InvalidInput("state dimension does not match the architecture");
  MatrixXd m(static_cast<Eigen::Index>(state.size()), 1);
  for (std::size_t i = 0; i < state.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = state[i];
  return m;
}

ActionBatch single_action(const Architecture& a, const Action& action) {
  std::vector<Action> one{action};
  return stack_actions(one, a);
}

void init_layer(MatMap w, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (2.0 * uniform01(rng) - 1.0);
}

// d log pi(a|s) / d outputs, scaled per sample by coef; plus the log-std part.
struct OutputGradient {
  MatrixXd dy;
  VectorXd dlog_std;
};

OutputGradient log_prob_output_gradient(const PolicyParams& p, const Forward& f,
                                        const ActionBatch& actions, const VectorXd& coef) {
  const auto& a = p.arch;
  OutputGradient out;
  if (a.head == Head::categorical) {
    const MatrixXd probs = log_softmax(f.y).array().exp().matrix();
    out.dy = -probs;
    for (Eigen::Index j = 0; j < out.dy.cols(); ++j) {
      out.dy(actions.indices[static_cast<std::size_t>(j)], j) += 1.0;
      out.dy.col(j) *= coef(j);
    }
    return out;
  }
  const auto l = const_views(a, p.theta);
  const VectorXd inv_var = (-2.0 * l.log_std.array()).exp().matrix();
  const MatrixXd diff = actions.values - f.y;
  out.dy = (diff.array().colwise() * inv_var.array()).matrix();
  out.dy.array().rowwise() *= coef.transpose().array();
  const MatrixXd z2 = (diff.array().square().colwise() * inv_var.array()).matrix();
  out.dlog_std = ((z2.array() - 1.0).matrix() * coef);
  return out;
}

VectorXd full_gradient(const PolicyParams& p, const Forward& f, const OutputGradient& og) {
  VectorXd grad = backward(p.arch, p.theta, f, og.dy);
  if (p.arch.head == Head::gaussian) {
    const Offsets o = offsets(p.arch);
    grad.segment(static_cast<Eigen::Index>(o.log_std), static_cast<Eigen::Index>(p.arch.out_dim)) = og.dlog_std;
  }
  return grad;
}

VectorXd log_probs_from_forward(const PolicyParams& p, const Forward& f, const ActionBatch& actions) {
  const auto& a = p.arch;
  const auto n = f.y.cols();
  if (static_cast<Eigen::Index>(actions.size()) != n) throw InvalidInput("action batch size mismatch");
  VectorXd out(n);
  if (a.head == Head::categorical) {
    const MatrixXd lsm = log_softmax(f.y);
    for (Eigen::Index j = 0; j < n; ++j) {
      const int idx = actions.indices[static_cast<std::size_t>(j)];
      if (idx < 0 || static_cast<std::size_t>(idx) >= a.out_dim) throw InvalidInput("action index out of range");
      out(j) = lsm(idx, j);
    }
    return out;
  }
  const auto l = const_views(a, p.theta);
  const VectorXd inv_std = (-l.log_std.array()).exp().matrix();
  const double constant = -l.log_std.sum() - 0.5 * log_two_pi * static_cast<double>(a.out_dim);
  for (Eigen::Index j = 0; j < n; ++j) {
    const VectorXd z = (actions.values.col(j) - f.y.col(j)).cwiseProduct(inv_std);
    out(j) = constant - 0.5 * z.squaredNorm();
  }
  return out;
}

void check_batch(const PolicyBatch& b) {
  const auto n = b.states.cols();
  if (static_cast<Eigen::Index>(b.actions.size()) != n || b.old_log_probs.size() != n ||
      b.reward_advantages.size() != n || b.cost_advantages.size() != n)
    throw InvalidInput("policy batch arrays disagree in length");
  if (n == 0) throw InvalidInput("empty policy batch");
}

VectorXd ratios(const PolicyParams& p, const Forward& f, const PolicyBatch& b) {
  return (log_probs_from_forward(p, f, b.actions) - b.old_log_probs).array().exp().matrix();
}

const VectorXd& channel_advantages(const PolicyBatch& b, cmdp::Channel c) {
  return c == cmdp::Channel::reward ? b.reward_advantages : b.cost_advantages;
}

double channel_scale(const PolicyBatch& b, cmdp::Channel c) {
  return c == cmdp::Channel::reward ? 1.0 : 1.0 / (1.0 - b.gamma);
}

}  // namespace

std::size_t Architecture::parameter_count() const { return offsets(*this).end; }

PolicyParams init_policy(const Architecture& arch, std::uint64_t seed, double log_std_init) {
  if (arch.head == Head::value) throw InvalidInput("init_policy: value head requested");
  if (arch.obs_dim == 0 || arch.out_dim == 0 || arch.hidden == 0) throw InvalidInput("init_policy: empty layer");
  PolicyParams p{arch, VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count()))};
  Rng rng(seed);
  auto v = mutable_views(arch, p.theta);
  init_layer(v.w1, 1.0, rng);
  init_layer(v.w2, 1.0, rng);
  init_layer(v.w3, 0.01, rng);
  if (arch.head == Head::gaussian) v.log_std.setConstant(log_std_init);
  return p;
}

ValueParams init_value(std::size_t obs_dim, std::uint64_t seed, std::size_t hidden) {
  const Architecture arch{Head::value, obs_dim, 1, hidden};
  ValueParams p{arch, VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count()))};
  Rng rng(seed);
  auto v = mutable_views(arch, p.theta);
  init_layer(v.w1, 1.0, rng);
  init_layer(v.w2, 1.0, rng);
  init_layer(v.w3, 1.0, rng);
  return p;
}

MatrixXd stack_states(std::span<const Observation> states) {
  if (states.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(states.front().size());
  MatrixXd m(dim, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (static_cast<Eigen::Index>(states[j].size()) != dim) throw InvalidInput("ragged state batch");
    for (Eigen::Index i = 0; i < dim; ++i) m(i, static_cast<Eigen::Index>(j)) = states[j][static_cast<std::size_t>(i)];
  }
  return m;
}

ActionBatch stack_actions(std::span<const Action> actions, const Architecture& arch) {
  ActionBatch batch;
  if (arch.head == Head::categorical) {
    batch.indices.reserve(actions.size());
    for (const auto& a : actions) {
      const int* idx = std::get_if<int>(&a);
      if (idx == nullptr) throw InvalidInput("categorical policy needs discrete actions");
      batch.indices.push_back(*idx);
    }
    return batch;
  }
  const auto dim = static_cast<Eigen::Index>(arch.out_dim);
  batch.values.resize(dim, static_cast<Eigen::Index>(actions.size()));
  for (std::size_t j = 0; j < actions.size(); ++j) {
    const auto* vec = std::get_if<std::vector<double>>(&actions[j]);
    if (vec == nullptr || static_cast<Eigen::Index>(vec->size()) != dim)
      throw InvalidInput("gaussian policy needs continuous actions of matching dimension");
    for (Eigen::Index i = 0; i < dim; ++i) batch.values(i, static_cast<Eigen::Index>(j)) = (*vec)[static_cast<std::size_t>(i)];
  }
  return batch;
}

MatrixXd policy_outputs(const PolicyParams& params, const MatrixXd& states) {
  return forward(params.arch, params.theta, states).y;
}

VectorXd log_probs(const PolicyParams& params, const MatrixXd& states, const ActionBatch& actions) {
  const Forward f = forward(params.arch, params.theta, states);
  return log_probs_from_forward(params, f, actions);
}

double policy_log_prob(const PolicyParams& params, std::span<const double> state, const Action& action) {
  return log_probs(params, single_state(params.arch, state), single_action(params.arch, action))(0);
}

SampledAction sample_action(const PolicyParams& params, std::span<const double> state, Rng& rng) {
  const MatrixXd y = policy_outputs(params, single_state(params.arch, state));
  SampledAction out;
  if (params.arch.head == Head::categorical) {
    const VectorXd lsm = log_softmax(y).col(0);
    const double u = uniform01(rng);
    double acc = 0.0;
    Eigen::Index pick = lsm.size() - 1;
    for (Eigen::Index i = 0; i < lsm.size(); ++i) {
      acc += std::exp(lsm(i));
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.action = static_cast<int>(pick);
    out.log_prob = lsm(pick);
    return out;
  }
  const auto l = const_views(params.arch, params.theta);
  std::vector<double> a(params.arch.out_dim);
  double lp = -0.5 * log_two_pi * static_cast<double>(a.size()) - l.log_std.sum();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = standard_normal(rng);
    a[i] = y(static_cast<Eigen::Index>(i), 0) + std::exp(l.log_std(static_cast<Eigen::Index>(i))) * z;
    lp -= 0.5 * z * z;
  }
  out.action = std::move(a);
  out.log_prob = lp;
  return out;
}

namespace {
Action clamp_action(Action action, const std::optional<ActionBounds>& bounds) {
  if (!bounds) return action;
  if (auto* vec = std::get_if<std::vector<double>>(&action)) {
    for (std::size_t i = 0; i < vec->size(); ++i)
      (*vec)[i] = std::clamp((*vec)[i], bounds->low.at(i), bounds->high.at(i));
  }
  return action;
}
}  // namespace

Action policy_sample(const PolicyParams& params, std::span<const double> state, Rng& rng,
                     const std::optional<ActionBounds>& bounds) {
  return clamp_action(sample_action(params, state, rng).action, bounds);
}

Action policy_mode(const PolicyParams& params, std::span<const double> state,
                   const std::optional<ActionBounds>& bounds) {
  const MatrixXd y = policy_outputs(params, single_state(params.arch, state));
  if (params.arch.head == Head::categorical) {
    Eigen::Index best = 0;
    y.col(0).maxCoeff(&best);
    return static_cast<int>(best);
  }
  std::vector<double> mean(y.col(0).data(), y.col(0).data() + y.rows());
  return clamp_action(mean, bounds);
}

double surrogate_reward(const PolicyParams& params, const PolicyBatch& batch) {
  check_batch(batch);
  const Forward f = forward(params.arch, params.theta, batch.states);
  return ratios(params, f, batch).dot(batch.reward_advantages) / static_cast<double>(batch.states.cols());
}

double surrogate_cost(const PolicyParams& params, const PolicyBatch& batch) {
  check_batch(batch);
  const Forward f = forward(params.arch, params.theta, batch.states);
  return ratios(params, f, batch).dot(batch.cost_advantages) / static_cast<double>(batch.states.cols()) /
         (1.0 - batch.gamma);
}

VectorXd surrogate_gradient(const PolicyParams& params, const PolicyBatch& batch, cmdp::Channel channel) {
  check_batch(batch);
  const Forward f = forward(params.arch, params.theta, batch.states);
  const double scale = channel_scale(batch, channel) / static_cast<double>(batch.states.cols());
  const VectorXd coef = ratios(params, f, batch).cwiseProduct(channel_advantages(batch, channel)) * scale;
  return full_gradient(params, f, log_prob_output_gradient(params, f, batch.actions, coef));
}

SurrogateGradients surrogate_gradients(const PolicyParams& theta_k, const PolicyBatch& batch) {
  return {surrogate_gradient(theta_k, batch, cmdp::Channel::reward),
          surrogate_gradient(theta_k, batch, cmdp::Channel::cost)};
}

double kl_divergence(const PolicyParams& params, const PolicyParams& reference, const MatrixXd& states) {
  if (!(params.arch == reference.arch)) throw InvalidInput("kl_divergence: architectures differ");
  const Forward f = forward(params.arch, params.theta, states);
  const Forward fk = forward(reference.arch, reference.theta, states);
  const auto n = static_cast<double>(states.cols());
  if (params.arch.head == Head::categorical) {
    const MatrixXd lp = log_softmax(f.y);
    const MatrixXd lq = log_softmax(fk.y);
    return (lp.array().exp() * (lp - lq).array()).sum() / n;
  }
  const auto l = const_views(params.arch, params.theta);
  const auto lk = const_views(reference.arch, reference.theta);
  const VectorXd inv_var_k = (-2.0 * lk.log_std.array()).exp().matrix();
  const VectorXd var = (2.0 * l.log_std.array()).exp().matrix();
  const double per_state_const =
      (lk.log_std - l.log_std).sum() + 0.5 * var.cwiseProduct(inv_var_k).sum() - 0.5 * static_cast<double>(var.size());
  const MatrixXd diff = f.y - fk.y;
  const double mean_term = 0.5 * (diff.array().square().colwise() * inv_var_k.array()).sum() / n;
  return per_state_const + mean_term;
}

VectorXd kl_gradient(const PolicyParams& params, const PolicyParams& reference, const MatrixXd& states) {
  if (!(params.arch == reference.arch)) throw InvalidInput("kl_gradient: architectures differ");
  const Forward f = forward(params.arch, params.theta, states);
  const Forward fk = forward(reference.arch, reference.theta, states);
  const auto n = static_cast<double>(states.cols());
  OutputGradient og;
  if (params.arch.head == Head::categorical) {
    const MatrixXd lp = log_softmax(f.y);
    const MatrixXd lq = log_softmax(fk.y);
    const MatrixXd p = lp.array().exp().matrix();
    og.dy.resize(p.rows(), p.cols());
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const VectorXd log_ratio = lp.col(j) - lq.col(j);
      const double kl = p.col(j).dot(log_ratio);
      og.dy.col(j) = (p.col(j).array() * (log_ratio.array() - kl)).matrix() / n;
    }
    return full_gradient(params, f, og);
  }
  const auto l = const_views(params.arch, params.theta);
  const auto lk = const_views(reference.arch, reference.theta);
  const VectorXd inv_var_k = (-2.0 * lk.log_std.array()).exp().matrix();
  og.dy = ((f.y - fk.y).array().colwise() * inv_var_k.array()).matrix() / n;
  og.dlog_std = ((2.0 * l.log_std.array()).exp() * inv_var_k.array() - 1.0).matrix();
  return full_gradient(params, f, og);
}

struct FisherOperator::Cache {
  MatrixXd states;
  Forward f;
  MatrixXd probs;
};

FisherOperator::FisherOperator(PolicyParams theta_k, MatrixXd states, double damping)
    : theta_k_(std::move(theta_k)), damping_(damping) {
  auto cache = std::make_shared<Cache>();
  cache->states = std::move(states);
  cache->f = forward(theta_k_.arch, theta_k_.theta, cache->states);
  if (theta_k_.arch.head == Head::categorical) cache->probs = log_softmax(cache->f.y).array().exp().matrix();
  cache_ = std::move(cache);
}

VectorXd FisherOperator::operator()(const VectorXd& v) const {
  const auto& arch = theta_k_.arch;
  if (static_cast<std::size_t>(v.size()) != arch.parameter_count())
    throw InvalidInput("fisher_vector_product: vector has the wrong dimension");
  const Forward& f = cache_->f;
  const MatrixXd dy = jvp(arch, theta_k_.theta, f, v);
  const auto n = static_cast<double>(f.y.cols());

  OutputGradient og;
  if (arch.head == Head::categorical) {
    const MatrixXd& p = cache_->probs;
    const Eigen::RowVectorXd pu = p.cwiseProduct(dy).colwise().sum();
    og.dy = (p.array() * (dy.rowwise() - pu).array()).matrix() / n;
  } else {
    const auto l = const_views(arch, theta_k_.theta);
    const VectorXd inv_var = (-2.0 * l.log_std.array()).exp().matrix();
    og.dy = (dy.array().colwise() * inv_var.array()).matrix() / n;
    const Offsets o = offsets(arch);
    og.dlog_std = 2.0 * v.segment(static_cast<Eigen::Index>(o.log_std), static_cast<Eigen::Index>(arch.out_dim));
  }
  return full_gradient(theta_k_, f, og) + damping_ * v;
}

VectorXd fisher_vector_product(const PolicyParams& theta_k, const MatrixXd& states, const VectorXd& v,
                               double damping) {
  if (static_cast<std::size_t>(v.size()) != theta_k.arch.parameter_count())
    throw InvalidInput("fisher_vector_product: vector has the wrong dimension");
  return FisherOperator(theta_k, states, damping)(v);
}

VectorXd value_predict(const ValueParams& params, const MatrixXd& states) {
  return forward(params.arch, params.theta, states).y.row(0).transpose();
}

double value_loss(const ValueParams& params, const MatrixXd& states, const VectorXd& targets) {
  if (targets.size() != states.cols()) throw InvalidInput("value_loss: target count mismatch");
  return (value_predict(params, states) - targets).squaredNorm() / static_cast<double>(targets.size());
}

VectorXd value_loss_gradient(const ValueParams& params, const MatrixXd& states, const VectorXd& targets) {
  if (targets.size() != states.cols()) throw InvalidInput("value_loss_gradient: target count mismatch");
  const Forward f = forward(params.arch, params.theta, states);
  const MatrixXd dy = 2.0 * (f.y.row(0) - targets.transpose()) / static_cast<double>(targets.size());
  return backward(params.arch, params.theta, f, dy);
}

ValueParams value_update(const ValueParams& params, const MatrixXd& states, const VectorXd& targets,
                         const ValueUpdateOptions& options) {
  if (!(options.lr > 0.0)) throw InvalidInput("value_update: lr must be positive");
  if (options.iterations < 1) throw InvalidInput("value_update: iterations must be >= 1");
  if (targets.size() != states.cols() || targets.size() == 0) throw InvalidInput("value_update: bad targets");

  const double initial = value_loss(params, states, targets);
  const Eigen::Index n = states.cols();
  const Eigen::Index mb = options.minibatch == 0 ? n : std::min<Eigen::Index>(n, static_cast<Eigen::Index>(options.minibatch));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(options.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  MatrixXd mb_states(states.rows(), mb);
  VectorXd mb_targets(mb);
  double lr = options.lr;
  for (int attempt = 0; attempt <= options.max_halvings; ++attempt, lr *= 0.5) {
    ValueParams p = params;
    VectorXd m = VectorXd::Zero(p.theta.size());
    VectorXd v = VectorXd::Zero(p.theta.size());
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t cursor = 0;
    for (int step = 1; step <= options.iterations; ++step) {
      VectorXd grad;
      if (mb == n) {
        grad = value_loss_gradient(p, states, targets);
      } else {
        for (Eigen::Index j = 0; j < mb; ++j, cursor = (cursor + 1) % order.size()) {
          mb_states.col(j) = states.col(order[cursor]);
          mb_targets(j) = targets(order[cursor]);
        }
        grad = value_loss_gradient(p, mb_states, mb_targets);
      }
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      p.theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    if (!p.theta.allFinite()) continue;
    if (value_loss(p, states, targets) <= initial) return p;
  }
  return params;
}

}  // namespace evo::policy
