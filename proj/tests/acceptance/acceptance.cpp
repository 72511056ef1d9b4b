#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "evo/bounds.hpp"
#include "evo/config.hpp"
#include "evo/evt.hpp"
#include "evo/policy.hpp"
#include "evo/train.hpp"
#include "evo/trust_region.hpp"

using namespace evo;
using evo::test::Gen;
using evo::test::relative_error;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// 1. GPD recovery, with a likelihood grid as the oracle.
Outcome gpd_recovery() {
  Gen gen(1001);
  int good = 0;
  int beats_grid = 0;
  double slowest = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto y = gen.gpd(5000, 0.3, 1.0);
    const auto t0 = Clock::now();
    const auto fit = evt::fit_gpd_mle(y);
    slowest = std::max(slowest, seconds_since(t0));
    if (std::abs(fit.xi - 0.3) <= 0.1 && std::abs(fit.sigma - 1.0) <= 0.1) ++good;

    double grid_best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 40; ++j)
        grid_best = std::max(grid_best, evt::gpd_log_likelihood(0.05 + 0.5 * i / 40.0, 0.7 + 0.6 * j / 40.0, y));
    if (evt::gpd_log_likelihood(fit.xi, fit.sigma, y) >= grid_best - 1e-9 * std::abs(grid_best)) ++beats_grid;
  }
  return {good >= 95 && beats_grid == 100 && slowest < 1.0,
          fmt("%d/100 within tolerance, %d/100 at least as likely as the grid optimum, slowest fit %.3fs", good,
              beats_grid, slowest)};
}

// 2. Closed-form identities.
Outcome identities() {
  Gen gen(1002);
  double roundtrip = 0.0, boundary = 0.0, ratio = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double xi = gen.uniform(-0.8, 1.5);
    if (std::abs(xi) < 1e-3) xi = 0.1;
    // Power-of-two n keeps 1 - mu_hat exact in the oracle.
    const auto n = std::size_t{1} << gen.integer(5, 13);
    const auto peaks = static_cast<std::size_t>(gen.integer(1, static_cast<int>(n) - 1));
    const auto p = test::gpd_params(xi, gen.uniform(0.1, 10.0), peaks, n, gen.uniform(-5.0, 50.0));

    const double u = gen.uniform(0.0, 0.999);
    roundtrip = std::max(roundtrip, std::abs(evt::gpd_cdf(p, evt::gpd_quantile(p, u)) - u));

    const double mu = p.mu_hat();
    const double nu = gen.uniform(0.0, 0.999) * (1.0 - mu);
    const double want = p.threshold + evt::gpd_quantile(p, nu / (1.0 - mu));
    boundary = std::max(boundary, std::abs(evt::risk_boundary(p, nu) - want) / std::max(1.0, std::abs(want)));

    if (nu > 0.0) {
      const auto v = bounds::variance_pair(mu, nu, gen.integer(1, 100000), gen.uniform(0.01, 10.0));
      ratio = std::max(ratio, std::abs(v.omega_evo / v.omega_qr - nu / (mu + nu)));
    }
  }
  return {roundtrip <= 1e-12 && boundary <= 1e-12 && ratio <= 1e-12,
          fmt("max errors: roundtrip %.2e, risk boundary %.2e, variance ratio %.2e", roundtrip, boundary, ratio)};
}

// 3. GPD against Gaussian on heavy-tailed cost data.
Outcome tail_fit() {
  Gen gen(1003);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> costs;
    for (int i = 0; i < 1600; ++i) costs.push_back(gen.uniform(0.0, 1.0));
    for (double y : gen.gpd(400, 0.5, 1.0)) costs.push_back(1.0 + y);
    const double threshold = evt::empirical_quantile(costs, 0.8);
    const auto peaks = evt::extract_peaks(costs, threshold);
    const auto gpd = evt::fit_gpd_mle(peaks);
    const auto gauss = evt::fit_gaussian(peaks);
    const double ks_gpd = evt::ks_statistic(peaks, [&](double z) {
      return z >= gpd.support_end() ? 1.0 : evt::gpd_cdf(gpd, z);
    });
    const double ks_gauss = evt::ks_statistic(peaks, [&](double z) { return gauss.cdf(z); });
    wins += ks_gpd < ks_gauss ? 1 : 0;
  }
  return {wins >= 95, fmt("GPD KS below Gaussian KS in %d/100 trials", wins)};
}

// 4. Trust-region step against a random-search QP optimum.
Outcome solver() {
  Gen gen(1004);
  double worst_gap = -std::numeric_limits<double>::infinity();
  double worst_lin = -std::numeric_limits<double>::infinity();
  double worst_kl = 0.0;
  double worst_recovery = 0.0;
  int feasible = 0, recovery = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // The second hundred starts far outside the feasible set.
    const bool infeasible_start = trial >= 100;
    const MatrixXd h = gen.spd(5);
    const VectorXd g = gen.normal_vector(5);
    const VectorXd gc = gen.normal_vector(5);
    const double delta = gen.uniform(0.005, 0.05);
    const double c = infeasible_start ? gen.uniform(2.0, 10.0) : gen.uniform(-0.3, 0.2);
    trust_region::StepProblem p;
    p.g = g;
    p.g_c = gc;
    p.hvp = [h](const VectorXd& x) -> VectorXd { return h * x; };
    p.c = c;
    p.delta = delta;
    const auto dual = trust_region::solve_dual(p);
    const VectorXd step = trust_region::propose_step(p);
    if (dual.recovery_needed) {
      ++recovery;
      const VectorXd closed = -std::sqrt(2.0 * delta / gc.dot(h.ldlt().solve(gc))) * h.ldlt().solve(gc);
      worst_recovery = std::max(worst_recovery, (step - closed).norm());
      continue;
    }
    ++feasible;
    worst_lin = std::max(worst_lin, c + gc.dot(step));
    worst_kl = std::max(worst_kl, 0.5 * step.dot(h * step) / delta - 1.0);

    const Eigen::LLT<MatrixXd> llt(h);
    const MatrixXd l_inv_t = llt.matrixU().solve(MatrixXd::Identity(5, 5));
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100000; ++i) {
      VectorXd z = gen.normal_vector(5);
      z *= std::sqrt(2.0 * delta) * std::pow(uniform01(gen.rng), 0.2) / z.norm();
      const VectorXd x = l_inv_t * z;
      if (c + gc.dot(x) <= 0.0) best = std::max(best, g.dot(x));
    }
    worst_gap = std::max(worst_gap, best - g.dot(step));
  }
  const bool pass = feasible >= 50 && recovery >= 100 && worst_gap <= 1e-4 && worst_lin <= 1e-6 &&
                    worst_kl <= 1e-6 && worst_recovery <= 1e-10;
  return {pass, fmt("%d feasible, %d recovery; random search beats the step by at most %.2e, constraint residual "
                    "%.2e, KL excess %.2e, recovery error %.2e",
                    feasible, recovery, worst_gap, worst_lin, worst_kl, worst_recovery)};
}

template <typename F>
VectorXd central_difference(const VectorXd& theta, F&& f) {
  const double h = 1e-5;
  VectorXd g(theta.size());
  VectorXd t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double orig = t(i);
    t(i) = orig + h;
    const double up = f(t);
    t(i) = orig - h;
    const double down = f(t);
    t(i) = orig;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// 5. Gradients against finite differences.
Outcome gradients() {
  Gen gen(1005);
  double surrogate = 0.0, value = 0.0, fvp = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool discrete = trial % 2 == 0;
    const policy::Architecture arch{discrete ? policy::Head::categorical : policy::Head::gaussian, 3,
                                    discrete ? 4u : 2u, 10};
    auto p = policy::init_policy(arch, static_cast<std::uint64_t>(trial));
    p.theta += 0.4 * gen.normal_vector(p.theta.size());

    policy::PolicyBatch b;
    b.states = gen.normal_matrix(3, 50);
    std::vector<Action> actions;
    Rng rng(static_cast<std::uint64_t>(100 + trial));
    for (Eigen::Index j = 0; j < 50; ++j) {
      std::vector<double> s(b.states.col(j).data(), b.states.col(j).data() + 3);
      actions.push_back(policy::sample_action(p, s, rng).action);
    }
    b.actions = policy::stack_actions(actions, arch);
    b.old_log_probs = policy::log_probs(p, b.states, b.actions);
    b.reward_advantages = gen.normal_vector(50);
    b.cost_advantages = gen.normal_vector(50);

    const auto grads = policy::surrogate_gradients(p, b);
    const auto fd_r = central_difference(p.theta, [&](const VectorXd& t) { return policy::surrogate_reward({arch, t}, b); });
    const auto fd_c = central_difference(p.theta, [&](const VectorXd& t) { return policy::surrogate_cost({arch, t}, b); });
    surrogate = std::max({surrogate, relative_error(grads.g, fd_r), relative_error(grads.g_c, fd_c)});

    auto v = policy::init_value(3, static_cast<std::uint64_t>(trial), 10);
    v.theta += 0.2 * gen.normal_vector(v.theta.size());
    const VectorXd targets = gen.normal_vector(50);
    const auto fd_v =
        central_difference(v.theta, [&](const VectorXd& t) { return policy::value_loss({v.arch, t}, b.states, targets); });
    value = std::max(value, relative_error(policy::value_loss_gradient(v, b.states, targets), fd_v));

    const VectorXd dir = gen.normal_vector(p.theta.size());
    const double eps = 1e-5;
    const VectorXd up = policy::kl_gradient({arch, p.theta + eps * dir}, p, b.states);
    const VectorXd down = policy::kl_gradient({arch, p.theta - eps * dir}, p, b.states);
    const VectorXd fd_h = (up - down) / (2.0 * eps) + 0.1 * dir;
    fvp = std::max(fvp, relative_error(policy::fisher_vector_product(p, b.states, dir, 0.1), fd_h));
  }
  return {surrogate <= 1e-4 && value <= 1e-4 && fvp <= 1e-3,
          fmt("max relative errors: surrogate %.2e, value %.2e, Fisher product %.2e", surrogate, value, fvp)};
}

// 6. Bound plumbing.
Outcome theory() {
  Gen gen(1006);
  bool nu0_zero = true;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const auto n = static_cast<std::size_t>(gen.integer(2, 5000));
    const auto peaks = static_cast<std::size_t>(gen.integer(1, static_cast<int>(n) - 1));
    const auto g = test::gpd_params(gen.uniform(0.01, 2.0), gen.uniform(0.1, 10.0), peaks, n);
    nu0_zero = nu0_zero && bounds::compute_nu0(g, 0.0, gen.uniform(0.5, 0.999)) == 0.0;
    const double tail = 1.0 - g.mu_hat();
    // J at or beyond the GPD value of the safety boundary.
    const double j = std::pow(tail, -g.xi) * gen.uniform(1.0, 5.0);
    const double e = gen.uniform(0.0, 50.0);
    worst = std::max(worst, bounds::violation_prob_bound(g, j, e) / tail - 1.0);
  }
  const double example = bounds::violation_prob_bound(test::gpd_params(0.5, 1.0), 2.0, 0.0);
  return {nu0_zero && example == 0.25 && worst <= 1e-12,
          fmt("nu0(tv=0)=0 %s, bound(J=2,E=0,xi=0.5)=%.17g, max bound/(1-mu)-1 = %.2e", nu0_zero ? "always" : "NOT always",
              example, worst)};
}

TrainConfig desk_config(Mode mode, std::uint64_t seed) {
  TrainConfig c;
  c.name = mode_name(mode) + "-" + std::to_string(seed);
  c.output_dir = "";
  c.env_id = "hazard-grid";
  c.mode = mode;
  c.seed = seed;
  c.cost_limit = 25.0;
  return c;
}

double last10(const std::vector<EpochMetrics>& m, double EpochMetrics::*field) {
  double s = 0.0;
  const std::size_t from = m.size() - std::min<std::size_t>(10, m.size());
  for (std::size_t i = from; i < m.size(); ++i) s += m[i].*field;
  return s / static_cast<double>(m.size() - from);
}

// 7. EVO against plain CPO at desk scale.
Outcome behavior() {
  const auto t0 = Clock::now();
  double evo_cost = 0.0, evo_vio = 0.0, cpo_cost = 0.0, cpo_vio = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto e = train(desk_config(Mode::evo, seed));
    const auto c = train(desk_config(Mode::cpo, seed));
    const double ev = last10(e.metrics, &EpochMetrics::violation_rate);
    const double cv = last10(c.metrics, &EpochMetrics::violation_rate);
    evo_cost += last10(e.metrics, &EpochMetrics::mean_cost) / 6.0;
    cpo_cost += last10(c.metrics, &EpochMetrics::mean_cost) / 6.0;
    evo_vio += ev / 6.0;
    cpo_vio += cv / 6.0;
    per_seed += fmt(" %.3f/%.3f", ev, cv);
    std::fprintf(stderr, "  seed %llu: evo violation %.4f, cpo violation %.4f (%.0fs elapsed)\n",
                 static_cast<unsigned long long>(seed), ev, cv, seconds_since(t0));
  }
  const double elapsed = seconds_since(t0);
  return {evo_cost <= 25.0 && evo_vio < cpo_vio && elapsed <= 1800.0,
          fmt("EVO J_C %.3f, violation rate EVO %.4f vs CPO %.4f (CPO J_C %.3f), per seed evo/cpo:%s, %.0fs", evo_cost,
              evo_vio, cpo_vio, cpo_cost, per_seed.c_str(), elapsed)};
}

std::string run_to_disk(Mode mode, std::uint64_t seed, const fs::path& root, const std::string& name) {
  auto c = desk_config(mode, seed);
  c.output_dir = root.string();
  c.name = name;
  c.total_steps = 10 * c.epoch_batch_steps;
  train(c);
  std::ifstream in(root / name / "metrics.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "evo_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 8. Ablations change the logged metrics.
Outcome ablations() {
  const auto dir = scratch_dir();
  const auto evo = run_to_disk(Mode::evo, 0, dir, "evo");
  const auto noprio = run_to_disk(Mode::no_prioritization, 0, dir, "no-prioritization");
  const auto constq = run_to_disk(Mode::constant_quantile, 0, dir, "constant-quantile");
  fs::remove_all(dir);
  const bool complete = !evo.empty() && !noprio.empty() && !constq.empty();
  return {complete && noprio != evo && constq != evo,
          fmt("no-prioritization %s, constant-quantile %s", noprio != evo ? "differs" : "IDENTICAL",
              constq != evo ? "differs" : "IDENTICAL")};
}

// 9. Byte-identical reruns.
Outcome determinism() {
  const auto dir = scratch_dir();
  const auto a = run_to_disk(Mode::evo, 4, dir, "a");
  const auto b = run_to_disk(Mode::evo, 4, dir, "b");
  fs::remove_all(dir);
  return {!a.empty() && a == b, fmt("%zu bytes, %s", a.size(), a == b ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{gpd_recovery, identities, tail_fit,  solver,     gradients,
                                                       theory,       behavior,   ablations, determinism};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
