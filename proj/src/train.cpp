#include "evo/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>

#include "evo/bounds.hpp"
#include "evo/checkpoint.hpp"
#include "evo/cmdp.hpp"
#include "evo/error.hpp"
#include "evo/evt.hpp"
#include "evo/replay.hpp"
#include "evo/rng.hpp"
#include "evo/trust_region.hpp"

namespace evo {

namespace fs = std::filesystem;
using policy::MatrixXd;
using policy::VectorXd;

namespace {

constexpr std::uint64_t stream_env = 1;
constexpr std::uint64_t stream_action = 2;
constexpr std::uint64_t stream_eval = 3;
constexpr std::uint64_t stream_replay = 4;
constexpr std::uint64_t stream_init = 5;
constexpr std::uint64_t stream_value = 6;

const double nan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<Trajectory> collect(envs::Environment& env, const policy::PolicyParams& pi, std::uint64_t seed,
                                long long epoch, long long min_steps) {
  std::vector<Trajectory> out;
  long long steps = 0;
  for (std::uint64_t episode = 0; steps < min_steps; ++episode) {
    Rng action_rng(derive_seed(seed, stream_action, static_cast<std::uint64_t>(epoch), episode));
    Trajectory traj;
    Observation obs = env.reset(derive_seed(seed, stream_env, static_cast<std::uint64_t>(epoch), episode));
    while (true) {
      auto sampled = policy::sample_action(pi, obs, action_rng);
      const auto result = env.step(sampled.action);
      StepRecord rec;
      rec.state = std::move(obs);
      rec.action = std::move(sampled.action);
      rec.reward = result.reward;
      rec.cost = result.cost;
      rec.log_prob = sampled.log_prob;
      rec.done = result.done;
      traj.steps.push_back(std::move(rec));
      obs = result.observation;
      if (result.done || result.truncated) break;
    }
    traj.final_state = std::move(obs);
    steps += static_cast<long long>(traj.size());
    out.push_back(std::move(traj));
  }
  return out;
}

struct Batch {
  MatrixXd states;
  std::vector<Action> actions;
  std::vector<cmdp::TrajectoryValues> values;
};

Batch flatten(const std::vector<Trajectory>& trajs, const policy::ValueParams& v_r,
              const policy::ValueParams& v_c) {
  std::vector<Observation> states;
  std::vector<Observation> finals;
  Batch b;
  for (const auto& t : trajs) {
    for (const auto& s : t.steps) {
      states.push_back(s.state);
      b.actions.push_back(s.action);
    }
    finals.push_back(t.final_state);
  }
  b.states = policy::stack_states(states);
  const MatrixXd final_states = policy::stack_states(finals);
  const VectorXd pr = policy::value_predict(v_r, b.states);
  const VectorXd pc = policy::value_predict(v_c, b.states);
  const VectorXd fr = policy::value_predict(v_r, final_states);
  const VectorXd fc = policy::value_predict(v_c, final_states);
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(trajs[k].size());
    cmdp::TrajectoryValues tv;
    tv.reward.assign(pr.data() + offset, pr.data() + offset + n);
    tv.cost.assign(pc.data() + offset, pc.data() + offset + n);
    const bool terminal = trajs[k].terminated();
    tv.reward.push_back(terminal ? 0.0 : fr(static_cast<Eigen::Index>(k)));
    tv.cost.push_back(terminal ? 0.0 : fc(static_cast<Eigen::Index>(k)));
    b.values.push_back(std::move(tv));
    offset += n;
  }
  return b;
}

VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Fit with fallback to the previous shape and scale when there are too few peaks.
struct TailFit {
  evt::GpdParams gpd;
  bool fitted = false;
  std::vector<double> excesses;
};

TailFit fit_with_fallback(std::span<const double> samples, double threshold, const evt::GpdParams& previous,
                          const evt::FitOptions& options, std::vector<std::string>& warnings, long long epoch,
                          const char* what) {
  TailFit out;
  out.excesses = evt::extract_peaks(samples, threshold);
  try {
    out.gpd = evt::fit_gpd_mle(out.excesses, options);
    out.fitted = true;
  } catch (const InsufficientData& e) {
    warnings.push_back("epoch " + std::to_string(epoch) + ": " + what + " tail: " + e.what() +
                       "; reusing previous shape and scale");
  } catch (const DegenerateData& e) {
    warnings.push_back("epoch " + std::to_string(epoch) + ": " + what + " tail: " + e.what() +
                       "; reusing previous shape and scale");
  }
  if (!out.fitted) {
    out.gpd.xi = previous.xi;
    out.gpd.sigma = previous.sigma;
  }
  out.gpd.threshold = threshold;
  out.gpd.n_total = samples.size();
  out.gpd.n_peaks = std::max<std::size_t>(out.excesses.size(), 1);
  out.gpd.n_total = std::max(out.gpd.n_total, out.gpd.n_peaks);
  return out;
}

class RunFiles {
 public:
  explicit RunFiles(const TrainConfig& config) {
    if (config.output_dir.empty()) return;
    dir_ = fs::path(config.output_dir) / config.name;
    fs::create_directories(dir_);
    std::ofstream(dir_ / "config.txt") << config.to_text();
    metrics_.open(dir_ / "metrics.csv", std::ios::trunc);
    metrics_ << metrics_header() << '\n';
    timing_.open(dir_ / "timing.csv", std::ios::trunc);
    timing_ << "epoch,wall_time\n";
    warnings_.open(dir_ / "warnings.log", std::ios::trunc);
    if (!metrics_ || !timing_ || !warnings_) throw InvalidInput("cannot write run files under " + dir_.string());
  }

  bool enabled() const { return !dir_.empty(); }

  void epoch(const EpochMetrics& m, const std::vector<std::string>& warnings, std::size_t first_new) {
    if (!enabled()) return;
    metrics_ << metrics_row(m) << '\n' << std::flush;
    timing_ << m.epoch << ',' << fmt(m.wall_time) << '\n' << std::flush;
    for (std::size_t i = first_new; i < warnings.size(); ++i) warnings_ << warnings[i] << '\n';
    warnings_.flush();
  }

  void checkpoint(const std::string& env_id, long long epoch, std::uint64_t seed, const policy::PolicyParams& pi,
                  const policy::ValueParams& vr, const policy::ValueParams& vc, const std::string& file) {
    if (!enabled()) return;
    checkpoint::Checkpoint ckpt;
    ckpt.env_id = env_id;
    ckpt.epoch = static_cast<std::uint64_t>(epoch);
    ckpt.blocks = {{pi.arch, seed, pi.theta}, {vr.arch, seed, vr.theta}, {vc.arch, seed, vc.theta}};
    checkpoint::save(ckpt, dir_ / file);
  }

 private:
  fs::path dir_;
  std::ofstream metrics_, timing_, warnings_;
};

}  // namespace

std::string metrics_header() {
  return "epoch,mean_return,mean_cost,violation_rate,nu,mu_hat,xi,sigma,risk_boundary,nu0,prob_bound,ks_gpd,ks_gauss";
}

std::string metrics_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch);
  for (double v : {m.mean_return, m.mean_cost, m.violation_rate, m.nu, m.mu_hat, m.xi, m.sigma, m.risk_boundary,
                   m.nu0, m.prob_bound, m.ks_gpd, m.ks_gauss})
    row += ',' + fmt(v);
  return row;
}

policy::Architecture policy_architecture(const envs::EnvSpec& spec, std::size_t hidden) {
  policy::Architecture arch;
  arch.obs_dim = spec.observation_dim;
  arch.hidden = hidden;
  if (const auto* d = std::get_if<envs::DiscreteActions>(&spec.action_kind)) {
    arch.head = policy::Head::categorical;
    arch.out_dim = static_cast<std::size_t>(d->n);
  } else {
    arch.head = policy::Head::gaussian;
    arch.out_dim = std::get<envs::ContinuousActions>(spec.action_kind).dim;
  }
  return arch;
}

envs::EnvOptions env_options(const TrainConfig& c) {
  envs::EnvOptions o;
  o.shaping_weight = c.shaping_weight;
  o.grid_size = c.grid_size;
  o.layout_seed = c.layout_seed;
  o.slip_prob = c.slip_prob;
  o.max_episode_len = c.max_episode_len;
  return o;
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  const auto transform = evt::parse_transform(config.tail_transform);
  replay::ReweighOptions reweigh;
  reweigh.mode = replay::parse_ratio_mode(config.is_ratio_mode);
  reweigh.w_min = config.w_min;
  reweigh.w_max = config.w_max;
  evt::FitOptions fit_options;
  fit_options.min_peaks = static_cast<std::size_t>(config.min_peaks);

  auto env = envs::make_environment(config.env_id, env_options(config));
  const auto arch = policy_architecture(env->spec(), static_cast<std::size_t>(config.hidden));
  const auto hidden = static_cast<std::size_t>(config.hidden);

  TrainResult result;
  result.policy = policy::init_policy(arch, derive_seed(config.seed, stream_init, 0), config.log_std_init);
  result.reward_value = policy::init_value(arch.obs_dim, derive_seed(config.seed, stream_init, 1), hidden);
  result.cost_value = policy::init_value(arch.obs_dim, derive_seed(config.seed, stream_init, 2), hidden);

  RunFiles files(config);
  replay::ReplayBuffer buffer(static_cast<std::size_t>(config.replay_capacity));
  evt::TailModel tail;
  double nu = config.mode == Mode::cpo ? 0.0 : config.nu_init;

  policy::ValueUpdateOptions value_options;
  value_options.lr = config.value_lr;
  value_options.iterations = config.value_iters;
  value_options.minibatch = static_cast<std::size_t>(config.value_minibatch);


  const long long epochs = config.epochs();
  for (long long epoch = 0; epoch < epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t warnings_before = result.warnings.size();
    EpochMetrics m;
    m.epoch = epoch;
    try {
      const policy::PolicyParams theta_k = result.policy;

      // Rollouts and advantages under pi_k.
      const auto trajs = collect(*env, theta_k, config.seed, epoch, config.epoch_batch_steps);
      const Batch flat = flatten(trajs, result.reward_value, result.cost_value);
      const auto processed = cmdp::process_batch(trajs, flat.values, config.gamma, config.gae_lambda);
      const std::vector<double>& costs = processed.cumulative_costs;

      m.mean_return = mean_of(processed.episode_returns);
      m.mean_cost = mean_of(costs);
      m.violation_rate =
          static_cast<double>(std::count_if(costs.begin(), costs.end(), [&](double c) { return c > config.cost_limit; })) /
          static_cast<double>(costs.size());

      // Value networks.
      value_options.seed = derive_seed(config.seed, stream_value, static_cast<std::uint64_t>(epoch));
      result.reward_value =
          policy::value_update(result.reward_value, flat.states, to_eigen(processed.reward_returns), value_options);
      result.cost_value =
          policy::value_update(result.cost_value, flat.states, to_eigen(processed.cost_returns), value_options);

      // Off-policy importance resampling from earlier epochs.
      buffer.evict_older_than(static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(config.k_age));
      std::vector<double> off_costs, off_rewards;
      if (config.mode != Mode::no_offpolicy && !buffer.empty() && config.offpolicy_fraction > 0.0) {
        Rng replay_rng(derive_seed(config.seed, stream_replay, static_cast<std::uint64_t>(epoch)));
        const auto draw = [&](std::size_t count) {
          std::vector<std::size_t> idx;
          if (count == 0) return idx;
          if (config.mode == Mode::no_prioritization) {
            for (std::size_t i = 0; i < count; ++i) idx.push_back(uniform_index(replay_rng, buffer.size()));
          } else {
            idx = replay::sample_indices(buffer, replay_rng, static_cast<int>(count));
          }
          return idx;
        };
        const replay::LogProbFn log_prob = [&](const Observation& s, const Action& a) {
          return policy::policy_log_prob(theta_k, s, a);
        };
        std::map<const replay::TrajectoryLog*, double> weights;
        const auto n_cost = static_cast<std::size_t>(std::lround(config.offpolicy_fraction * static_cast<double>(trajs.size())));
        const auto n_reward =
            static_cast<std::size_t>(std::lround(config.offpolicy_fraction * static_cast<double>(processed.step_count())));
        for (std::size_t i : draw(n_cost)) {
          const auto& e = buffer[i];
          if (reweigh.mode == replay::RatioMode::product) {
            auto it = weights.find(e.trajectory.get());
            if (it == weights.end())
              it = weights.emplace(e.trajectory.get(), replay::trajectory_weight(*e.trajectory, log_prob, reweigh)).first;
            off_costs.push_back(it->second * e.trajectory_cost);
          } else {
            off_costs.push_back(replay::importance_reweigh(e, log_prob, reweigh).trajectory_cost);
          }
        }
        for (std::size_t i : draw(n_reward)) {
          const auto& e = buffer[i];
          const double w = std::clamp(std::exp(log_prob(e.state, e.action) - e.log_prob_old), reweigh.w_min, reweigh.w_max);
          off_rewards.push_back(w * e.reward_advantage);
        }
      }

      // Cost tail.
      const double q_mu = m.mean_cost;
      std::vector<double> cost_samples = evt::apply(transform, costs);
      const auto off_cost_samples = evt::apply(transform, off_costs);
      cost_samples.insert(cost_samples.end(), off_cost_samples.begin(), off_cost_samples.end());
      const TailFit cost_fit =
          fit_with_fallback(cost_samples, q_mu, tail.cost_gpd, fit_options, result.warnings, epoch, "cost");
      tail.cost_gpd = cost_fit.gpd;
      m.mu_hat = tail.cost_gpd.mu_hat();
      m.xi = tail.cost_gpd.xi;
      m.sigma = tail.cost_gpd.sigma;
      if (cost_fit.fitted) {
        const auto gpd = tail.cost_gpd;
        m.ks_gpd = evt::ks_statistic(cost_fit.excesses, [&](double z) {
          return z >= gpd.support_end() ? 1.0 : evt::gpd_cdf(gpd, z);
        });
        const auto gauss = evt::fit_gaussian(cost_fit.excesses);
        m.ks_gauss = evt::ks_statistic(cost_fit.excesses, [&](double z) { return gauss.cdf(z); });
      } else {
        m.ks_gpd = m.ks_gauss = nan;
      }

      // Risk boundary and constraint value.
      const double nu_cap = std::max(0.0, 1.0 - m.mu_hat - 1e-3);
      if (config.mode != Mode::constant_quantile) nu = std::min(nu, nu_cap);
      tail.nu = nu;
      m.nu = nu;
      double boundary;
      if (config.mode == Mode::constant_quantile) {
        boundary = evt::empirical_quantile(costs, std::min(1.0, m.mu_hat + nu));
      } else {
        boundary = evt::risk_boundary(tail);
      }
      m.risk_boundary = boundary;
      const double c = m.mean_cost + (boundary - q_mu) - config.cost_limit;
      result.constraint_values.push_back(c);

      // Reward tail over the normalized advantages.
      const double q_r = mean_of(processed.reward_advantages);
      std::vector<double> reward_samples = processed.reward_advantages;
      reward_samples.insert(reward_samples.end(), off_rewards.begin(), off_rewards.end());
      tail.reward_gpd =
          fit_with_fallback(reward_samples, q_r, tail.reward_gpd, fit_options, result.warnings, epoch, "reward").gpd;

      // Extreme priorities for the replay buffer.
      for (std::size_t i = 0; i < buffer.size(); ++i)
        buffer.set_priority(i, replay::priority(buffer[i], tail, config.p_floor));
      {
        std::size_t step = 0;
        for (std::size_t k = 0; k < trajs.size(); ++k) {
          auto log = std::make_shared<replay::TrajectoryLog>();
          for (const auto& s : trajs[k].steps) {
            log->states.push_back(s.state);
            log->actions.push_back(s.action);
            log->log_probs.push_back(s.log_prob);
          }
          for (const auto& s : trajs[k].steps) {
            replay::ReplayEntry e;
            e.state = s.state;
            e.action = s.action;
            e.reward_advantage = processed.reward_advantages[step++];
            e.trajectory_cost = costs[k];
            e.log_prob_old = s.log_prob;
            e.epoch_id = static_cast<std::uint64_t>(epoch);
            e.trajectory = log;
            e.priority = replay::priority(e, tail, config.p_floor);
            buffer.push(std::move(e));
          }
        }
      }

      // Trust-region policy step on the on-policy batch.
      policy::PolicyBatch batch;
      batch.states = flat.states;
      batch.actions = policy::stack_actions(flat.actions, arch);
      batch.old_log_probs = policy::log_probs(theta_k, batch.states, batch.actions);
      batch.reward_advantages = to_eigen(processed.reward_advantages);
      batch.cost_advantages = to_eigen(processed.cost_advantages);
      batch.gamma = config.gamma;

      const auto grads = policy::surrogate_gradients(theta_k, batch);
      trust_region::StepProblem problem;
      problem.g = grads.g;
      problem.g_c = grads.g_c;
      problem.c = c;
      problem.delta = config.delta;
      problem.cg.iterations = config.cg_iters;
      problem.cg.tolerance = config.cg_tol;
      problem.hvp = policy::FisherOperator(theta_k, batch.states, config.cg_damping);

      const auto as_params = [&](const VectorXd& theta) { return policy::PolicyParams{arch, theta}; };
      trust_region::LineSearchEvaluator evaluator;
      evaluator.kl = [&](const VectorXd& t) { return policy::kl_divergence(as_params(t), theta_k, batch.states); };
      evaluator.surrogate_reward = [&](const VectorXd& t) { return policy::surrogate_reward(as_params(t), batch); };
      evaluator.surrogate_cost = [&](const VectorXd& t) { return policy::surrogate_cost(as_params(t), batch); };

      VectorXd step;
      bool have_step = true;
      try {
        step = trust_region::propose_step(problem);
      } catch (const CannotRecover& e) {
        result.warnings.push_back("epoch " + std::to_string(epoch) + ": " + e.what() + "; policy left unchanged");
        have_step = false;
      }
      if (have_step) {
        trust_region::LineSearchOptions ls;
        ls.shrink = config.line_search_shrink;
        ls.max_backtracks = config.line_search_steps;
        const auto searched = trust_region::line_search(theta_k.theta, step, c, config.delta, evaluator, ls);
        if (!searched.accepted)
          result.warnings.push_back("epoch " + std::to_string(epoch) + ": line search rejected every step size");
        result.policy.theta = searched.theta;
      }

      // Theory diagnostics.
      const double eps_c = processed.cost_advantages.empty()
                               ? 0.0
                               : std::abs(*std::max_element(processed.cost_advantages.begin(),
                                                            processed.cost_advantages.end(),
                                                            [](double a, double b) { return std::abs(a) < std::abs(b); }));
      const double tv = bounds::estimate_tv_term(config.gamma, eps_c, config.delta);
      m.nu0 = bounds::compute_nu0(tail.cost_gpd, tv, config.gamma);
      const double advantage_term = evaluator.surrogate_cost(result.policy.theta) - evaluator.surrogate_cost(theta_k.theta);
      const double j = bounds::j_terms(tail.cost_gpd, m.mean_cost, advantage_term);
      const double e_term = tail.cost_gpd.xi / (tail.cost_gpd.sigma * (1.0 - config.gamma)) * tv;
      m.prob_bound = (j > 0.0 && e_term >= 0.0) ? bounds::violation_prob_bound(tail.cost_gpd, j, e_term) : nan;

      // Exploitation range.
      if (config.mode == Mode::evo || config.mode == Mode::no_prioritization || config.mode == Mode::no_offpolicy)
        nu = trust_region::adapt_nu(nu, m.mean_cost, config.cost_limit, config.alpha_nu, m.mu_hat);
    } catch (const TrainingError&) {
      throw;
    } catch (const std::exception& e) {
      throw TrainingError(epoch, e.what());
    }

    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.metrics.push_back(m);
    files.epoch(m, result.warnings, warnings_before);
    if ((epoch + 1) % config.checkpoint_every == 0) {
      char name[40];
      std::snprintf(name, sizeof name, "checkpoint_%04lld.bin", epoch + 1);
      files.checkpoint(config.env_id, epoch + 1, config.seed, result.policy, result.reward_value, result.cost_value,
                       name);
    }
  }
  files.checkpoint(config.env_id, epochs, config.seed, result.policy, result.reward_value, result.cost_value,
                   "checkpoint_final.bin");
  return result;
}

EvalResult evaluate(const policy::PolicyParams& pi, std::string_view env_id, int episodes, std::uint64_t seed,
                    const EvalOptions& options) {
  if (episodes < 1) throw InvalidInput("evaluate: episodes must be >= 1");
  auto env = envs::make_environment(env_id, options.env);
  std::optional<policy::ActionBounds> bounds;
  if (const auto* c = std::get_if<envs::ContinuousActions>(&env->spec().action_kind))
    bounds = policy::ActionBounds{c->low, c->high};
  EvalResult out;
  double total_return = 0.0;
  int violations = 0;
  for (int i = 0; i < episodes; ++i) {
    Observation obs = env->reset(derive_seed(seed, stream_eval, static_cast<std::uint64_t>(i)));
    double ret = 0.0;
    std::vector<double> costs;
    while (true) {
      const auto r = env->step(policy::policy_mode(pi, obs, bounds));
      ret += r.reward;
      costs.push_back(r.cost);
      obs = r.observation;
      if (r.done || r.truncated) break;
    }
    const double c = cmdp::discounted_return(costs, options.gamma);
    total_return += ret;
    out.episode_costs.push_back(c);
    if (c > options.cost_limit) ++violations;
  }
  out.mean_return = total_return / episodes;
  out.mean_cost = mean_of(out.episode_costs);
  out.violation_rate = static_cast<double>(violations) / episodes;
  return out;
}

}  // namespace evo
