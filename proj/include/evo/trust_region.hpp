#pragma once

#include <Eigen/Dense>
#include <functional>

namespace evo::trust_region {

using Eigen::VectorXd;

using Hvp = std::function<VectorXd(const VectorXd&)>;

struct CgOptions {
  int iterations = 20;
  double tolerance = 1e-8;  // relative residual
};

// Approximate solution of H x = b. Throws NumericalError on non-finite iterates.
VectorXd conjugate_gradient(const Hvp& hvp, const VectorXd& b, const CgOptions& options = {});

// Linearized constrained step with trust region 1/2 x^T H x <= delta:
//   maximize g^T x  s.t.  c + g_c^T x <= 0,  1/2 x^T H x <= delta
struct StepProblem {
  VectorXd g;
  VectorXd g_c;
  Hvp hvp;
  double c = 0.0;
  double delta = 0.01;
  CgOptions cg;
};

// nu_dual is the multiplier of the linear constraint, lambda the one of the
// trust region.
struct DualSolution {
  double lambda_star = 0.0;
  double nu_dual_star = 0.0;
  double q = 0.0;  // g^T H^-1 g
  double u = 0.0;  // g^T H^-1 g_c
  double v = 0.0;  // g_c^T H^-1 g_c
  bool recovery_needed = false;
  VectorXd hinv_g;
  VectorXd hinv_g_c;
};

// F(lambda, nu) = -(q - 2 nu u + nu^2 v) / (2 lambda) + nu c - lambda delta.
// The primal optimum equals -max F over lambda > 0, nu >= 0.
double dual_objective(double lambda, double nu_dual, double q, double u, double v, double c, double delta);

// Multipliers from the scalars alone. hinv_g and hinv_g_c are left empty.
DualSolution solve_dual_scalars(double q, double u, double v, double c, double delta);

DualSolution solve_dual(const StepProblem& problem);

// Step from a solved dual: (1/lambda) H^-1 (g - nu g_c) when feasible, the
// recovery step -sqrt(2 delta / v) H^-1 g_c otherwise. Throws CannotRecover when
// the constraint is violated and g_c has no H^-1 norm.
VectorXd step_from_dual(const DualSolution& dual, double c, double delta);

VectorXd propose_step(const StepProblem& problem);

// Callbacks evaluated at candidate parameter vectors.
struct LineSearchEvaluator {
  std::function<double(const VectorXd&)> kl;
  std::function<double(const VectorXd&)> surrogate_reward;
  std::function<double(const VectorXd&)> surrogate_cost;
};

struct LineSearchOptions {
  double shrink = 0.8;
  int max_backtracks = 10;
};

struct LineSearchResult {
  VectorXd theta;
  double alpha = 0.0;  // 0 when no candidate was accepted
  bool accepted = false;
};

// Backtracking over alpha = shrink^k. A candidate needs KL <= delta. With
// c < 0 it must also improve the reward surrogate and keep the cost surrogate
// increase within -c; otherwise it must decrease the cost surrogate.
LineSearchResult line_search(const VectorXd& theta_k, const VectorXd& step, double c, double delta,
                             const LineSearchEvaluator& evaluator, const LineSearchOptions& options = {});

// max(0, nu + alpha (J_C - d)), capped at 1 - mu_hat - 1e-3.
double adapt_nu(double nu, double j_c, double d, double alpha, double mu_hat);

}  // namespace evo::trust_region
