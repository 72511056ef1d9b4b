#include "evo/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evo/error.hpp"

namespace evo::trust_region {

namespace {
constexpr double tiny = 1e-20;
constexpr double inf = std::numeric_limits<double>::infinity();
}  // namespace

VectorXd conjugate_gradient(const Hvp& hvp, const VectorXd& b, const CgOptions& options) {
  if (options.iterations < 1) throw InvalidInput("conjugate_gradient: iterations must be >= 1");
  VectorXd x = VectorXd::Zero(b.size());
  if (!b.allFinite()) throw NumericalError("conjugate_gradient: non-finite right-hand side");
  const double b_norm = b.norm();
  if (b_norm == 0.0) return x;
  VectorXd r = b;
  VectorXd p = r;
  double rr = r.squaredNorm();
  for (int k = 0; k < options.iterations; ++k) {
    const VectorXd hp = hvp(p);
    const double php = p.dot(hp);
    if (!std::isfinite(php) || !hp.allFinite()) throw NumericalError("conjugate_gradient: non-finite product");
    if (php <= 0.0) break;
    const double alpha = rr / php;
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next)) throw NumericalError("conjugate_gradient: non-finite residual");
    if (std::sqrt(rr_next) <= options.tolerance * b_norm) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

double dual_objective(double lambda, double nu_dual, double q, double u, double v, double c, double delta) {
  return -(q - 2.0 * nu_dual * u + nu_dual * nu_dual * v) / (2.0 * lambda) + nu_dual * c - lambda * delta;
}

DualSolution solve_dual_scalars(double q, double u, double v, double c, double delta) {
  if (!(delta > 0.0)) throw InvalidInput("solve_dual: delta must be positive");
  if (!std::isfinite(q) || !std::isfinite(u) || !std::isfinite(v) || !std::isfinite(c))
    throw NumericalError("solve_dual: non-finite scalars");
  DualSolution s;
  s.q = q;
  s.u = u;
  s.v = v;
  const double lambda_free = std::sqrt(std::max(q, 0.0) / (2.0 * delta));

  if (v <= tiny) {
    // No constraint direction: either the constraint is inactive or nothing can fix it.
    if (c > 0.0) {
      s.recovery_needed = true;
      return s;
    }
    s.lambda_star = lambda_free;
    return s;
  }

  const double b_coef = 2.0 * delta - c * c / v;
  if (c > 0.0 && b_coef <= 0.0) {
    s.recovery_needed = true;
    return s;
  }
  if (q <= tiny) {
    s.nu_dual_star = c >= 0.0 ? c / v : 0.0;
    return s;
  }
  if (c < 0.0 && b_coef <= 0.0) {
    s.lambda_star = lambda_free;
    return s;
  }

  const double a_coef = std::max(0.0, q - u * u / v);
  const auto f_a = [&](double lam) {
    return -a_coef / (2.0 * lam) - lam * b_coef / 2.0 + u * c / v;
  };
  const auto f_b = [&](double lam) { return -0.5 * (q / lam + 2.0 * delta * lam); };

  // Region a: lambda c + u > 0 (nu_dual > 0); region b: the complement.
  double lo_a = 0.0, hi_a = inf, lo_b = 0.0, hi_b = inf;
  bool has_a = false, has_b = false;
  if (c > 0.0) {
    const double edge = -u / c;
    has_a = true;
    lo_a = std::max(0.0, edge);
    has_b = u < 0.0;
    hi_b = edge;
  } else if (c < 0.0) {
    const double edge = -u / c;
    has_a = u > 0.0;
    hi_a = edge;
    has_b = true;
    lo_b = std::max(0.0, edge);
  } else {
    has_a = u > 0.0;
    has_b = !has_a;
  }

  double best_lambda = 0.0, best_value = -inf;
  bool best_is_a = false;
  if (has_a) {
    double lam = std::clamp(std::sqrt(a_coef / b_coef), lo_a, hi_a);
    lam = std::max(lam, std::numeric_limits<double>::min());
    best_lambda = lam;
    best_value = f_a(lam);
    best_is_a = true;
  }
  if (has_b) {
    double lam = std::clamp(lambda_free, lo_b, hi_b);
    lam = std::max(lam, std::numeric_limits<double>::min());
    const double value = f_b(lam);
    if (!best_is_a || value >= best_value) {
      best_lambda = lam;
      best_value = value;
      best_is_a = false;
    }
  }
  s.lambda_star = best_lambda;
  s.nu_dual_star = best_is_a ? std::max(0.0, (best_lambda * c + u) / v) : 0.0;
  return s;
}

DualSolution solve_dual(const StepProblem& problem) {
  if (problem.g.size() != problem.g_c.size()) throw InvalidInput("solve_dual: gradient sizes differ");
  if (!problem.hvp) throw InvalidInput("solve_dual: missing Hessian-vector product");
  VectorXd hinv_g = conjugate_gradient(problem.hvp, problem.g, problem.cg);
  VectorXd hinv_g_c = conjugate_gradient(problem.hvp, problem.g_c, problem.cg);
  const double q = problem.g.dot(hinv_g);
  const double u = problem.g.dot(hinv_g_c);
  const double v = problem.g_c.dot(hinv_g_c);
  DualSolution s = solve_dual_scalars(q, u, v, problem.c, problem.delta);
  s.hinv_g = std::move(hinv_g);
  s.hinv_g_c = std::move(hinv_g_c);
  return s;
}

VectorXd step_from_dual(const DualSolution& dual, double c, double delta) {
  const auto n = std::max(dual.hinv_g.size(), dual.hinv_g_c.size());
  if (dual.recovery_needed) {
    if (dual.v <= tiny) throw CannotRecover("constraint violated and its gradient vanishes");
    return -std::sqrt(2.0 * delta / dual.v) * dual.hinv_g_c;
  }
  if (dual.q <= tiny) {
    if (c < 0.0 || dual.v <= tiny) return VectorXd::Zero(n);
    return -(c / dual.v) * dual.hinv_g_c;
  }
  if (dual.v <= tiny || dual.nu_dual_star == 0.0) return dual.hinv_g / dual.lambda_star;
  return (dual.hinv_g - dual.nu_dual_star * dual.hinv_g_c) / dual.lambda_star;
}

VectorXd propose_step(const StepProblem& problem) {
  if (!problem.g.allFinite() || !problem.g_c.allFinite()) throw NumericalError("propose_step: non-finite gradients");
  return step_from_dual(solve_dual(problem), problem.c, problem.delta);
}

LineSearchResult line_search(const VectorXd& theta_k, const VectorXd& step, double c, double delta,
                             const LineSearchEvaluator& evaluator, const LineSearchOptions& options) {
  LineSearchResult result{theta_k, 0.0, false};
  if (step.size() != theta_k.size()) throw InvalidInput("line_search: step size mismatch");
  if (step.isZero(0.0)) return result;
  const double reward_k = evaluator.surrogate_reward(theta_k);
  const double cost_k = evaluator.surrogate_cost(theta_k);
  double alpha = 1.0;
  for (int k = 0; k < options.max_backtracks; ++k, alpha *= options.shrink) {
    const VectorXd theta = theta_k + alpha * step;
    const double kl = evaluator.kl(theta);
    if (!std::isfinite(kl) || kl > delta) continue;
    const double cost = evaluator.surrogate_cost(theta);
    bool ok;
    if (c < 0.0) {
      const double reward = evaluator.surrogate_reward(theta);
      ok = reward > reward_k && cost - cost_k <= std::max(0.0, -c);
    } else {
      ok = cost < cost_k;
    }
    if (ok) {
      result.theta = theta;
      result.alpha = alpha;
      result.accepted = true;
      return result;
    }
  }
  return result;
}

double adapt_nu(double nu, double j_c, double d, double alpha, double mu_hat) {
  if (!(alpha > 0.0)) throw InvalidInput("adapt_nu: alpha must be positive");
  const double cap = std::max(0.0, 1.0 - mu_hat - 1e-3);
  return std::clamp(nu + alpha * (j_c - d), 0.0, cap);
}

}  // namespace evo::trust_region
