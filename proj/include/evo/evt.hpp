#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace evo::evt {

// Generalized Pareto fit of the excesses over `threshold`.
//   F(z) = 1 - (1 + xi z / sigma)^(-1/xi),  z >= 0
struct GpdParams {
  double xi = 0.1;
  double sigma = 1.0;
  std::size_t n_peaks = 0;  // N_mu
  std::size_t n_total = 0;  // n
  double threshold = 0.0;   // safety boundary q_mu

  // Empirical quantile level of the threshold, 1 - N_mu / n.
  double mu_hat() const;
  // Upper end of the support; +inf for xi > 0.
  double support_end() const;
};

// Cost and reward tails plus the exploitation range nu.
struct TailModel {
  GpdParams cost_gpd;
  GpdParams reward_gpd;
  double nu = 0.0;

  double mu_hat() const { return cost_gpd.mu_hat(); }
};

// Excesses {x - threshold : x > threshold}, in input order.
std::vector<double> extract_peaks(std::span<const double> samples, double threshold);

double gpd_cdf(const GpdParams& params, double z);
double gpd_pdf(const GpdParams& params, double z);
// sigma/xi * ((1 - p)^(-xi) - 1), p in [0, 1).
double gpd_quantile(const GpdParams& params, double p);

// -N log sigma - (1 + 1/xi) sum log(1 + xi y / sigma); -inf outside the support.
double gpd_log_likelihood(double xi, double sigma, std::span<const double> excesses);

struct FitOptions {
  std::size_t min_peaks = 10;
  double xi_min = -0.9;
  double xi_max = 2.0;
  double xi_exclusion = 1e-3;  // |xi| below this is clamped away from the exponential limit
  int xi_grid_points = 40;
  double tolerance = 1e-8;  // in log-likelihood
};

// Maximum likelihood fit. The returned params have n_peaks = n_total =
// excesses.size() and threshold 0; use fit_tail for the full bookkeeping.
GpdParams fit_gpd_mle(std::span<const double> excesses, const FitOptions& options = {});

// Peaks over `threshold` from `samples`, fitted, with N_mu, n and threshold set.
GpdParams fit_tail(std::span<const double> samples, double threshold,
                   const FitOptions& options = {});

// q_mu + gpd_quantile(nu * n / N_mu).
double risk_boundary(const GpdParams& cost_gpd, double nu);
double risk_boundary(const TailModel& model);

// Kolmogorov-Smirnov sup distance between the empirical CDF of samples and cdf.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

struct GaussianFit {
  double mean = 0.0;
  double std_dev = 0.0;  // population

  double cdf(double x) const;
};

GaussianFit fit_gaussian(std::span<const double> samples);

// Empirical quantile by linear interpolation between order statistics.
double empirical_quantile(std::span<const double> samples, double level);

// Transform applied to samples before tail fitting. Only the identity is
// currently offered.
enum class Transform { identity };
Transform parse_transform(std::string_view name);
std::vector<double> apply(Transform transform, std::span<const double> samples);

}  // namespace evo::evt
