#include "evo/evt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "evo/error.hpp"

namespace evo::evt {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();
constexpr double golden = 0.6180339887498949;

void check_params(const GpdParams& params) {
  if (!(params.sigma > 0.0)) throw DomainError("gpd: sigma must be positive");
  if (params.xi == 0.0) throw DomainError("gpd: xi must be nonzero");
}

// Golden-section maximization of a unimodal f on [lo, hi].
template <typename F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, int iterations) {
  double a = lo, b = hi;
  double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iterations; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + golden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - golden * (b - a);
      f1 = f(x1);
    }
  }
  return f1 >= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

struct ProfilePoint {
  double log_sigma;
  double log_likelihood;
};

class GpdLikelihood {
 public:
  GpdLikelihood(std::span<const double> excesses, const FitOptions& options)
      : y_(excesses), options_(options) {
    y_max_ = *std::max_element(y_.begin(), y_.end());
    y_mean_ = std::accumulate(y_.begin(), y_.end(), 0.0) / static_cast<double>(y_.size());
  }

  double clamp_xi(double xi) const {
    xi = std::clamp(xi, options_.xi_min, options_.xi_max);
    if (std::abs(xi) < options_.xi_exclusion) xi = xi < 0.0 ? -options_.xi_exclusion : options_.xi_exclusion;
    return xi;
  }

  double operator()(double xi, double log_sigma) const {
    return gpd_log_likelihood(xi, std::exp(log_sigma), y_);
  }

  // Best sigma for a fixed xi.
  ProfilePoint profile(double xi, int iterations = 60) const {
    double lo = std::log(1e-8 * y_mean_);
    if (xi < 0.0) lo = std::max(lo, std::log(-xi * y_max_) + 1e-12);
    const double hi = std::log(1e3 * y_max_ * (1.0 + std::abs(xi)));
    auto [best, value] = golden_max([&](double t) { return (*this)(xi, t); }, lo, hi, iterations);
    return {best, value};
  }

 private:
  std::span<const double> y_;
  const FitOptions& options_;
  double y_max_ = 0.0;
  double y_mean_ = 0.0;
};

// Nelder-Mead on (xi, log sigma), maximizing. xi is projected after every move.
std::pair<std::array<double, 2>, double> nelder_mead(const GpdLikelihood& ll,
                                                     std::array<double, 2> start, double tol) {
  using Point = std::array<double, 2>;
  auto project = [&](Point p) {
    p[0] = ll.clamp_xi(p[0]);
    return p;
  };
  auto eval = [&](const Point& p) {
    const double v = ll(p[0], p[1]);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::array<Point, 3> s = {project(start), project({start[0] + 0.05, start[1]}),
                            project({start[0], start[1] + 0.05})};
  std::array<double, 3> f = {eval(s[0]), eval(s[1]), eval(s[2])};

  for (int iter = 0; iter < 500; ++iter) {
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    if (std::abs(f[worst] - f[best]) < tol &&
        std::abs(s[worst][0] - s[best][0]) + std::abs(s[worst][1] - s[best][1]) < 1e-9)
      break;

    const Point centroid = {(s[best][0] + s[mid][0]) / 2.0, (s[best][1] + s[mid][1]) / 2.0};
    auto along = [&](double t) {
      return project({centroid[0] + t * (s[worst][0] - centroid[0]),
                      centroid[1] + t * (s[worst][1] - centroid[1])});
    };

    const Point reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < f[best]) {
      const Point expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        s[worst] = expanded;
        f[worst] = fe;
      } else {
        s[worst] = reflected;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[mid]) {
      s[worst] = reflected;
      f[worst] = fr;
      continue;
    }
    const Point contracted = fr < f[worst] ? along(-0.5) : along(0.5);
    const double fc = eval(contracted);
    if (fc < std::min(fr, f[worst])) {
      s[worst] = contracted;
      f[worst] = fc;
      continue;
    }
    for (int k : {mid, worst}) {
      s[k] = project({(s[k][0] + s[best][0]) / 2.0, (s[k][1] + s[best][1]) / 2.0});
      f[k] = eval(s[k]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  return {s[best], -f[best]};
}

}  // namespace

double GpdParams::mu_hat() const {
  if (n_total == 0) return 0.0;
  return 1.0 - static_cast<double>(n_peaks) / static_cast<double>(n_total);
}

double GpdParams::support_end() const {
  return xi < 0.0 ? -sigma / xi : std::numeric_limits<double>::infinity();
}

std::vector<double> extract_peaks(std::span<const double> samples, double threshold) {
  std::vector<double> peaks;
  for (double x : samples)
    if (x > threshold) peaks.push_back(x - threshold);
  return peaks;
}

double gpd_cdf(const GpdParams& params, double z) {
  check_params(params);
  if (!(z >= 0.0) || z > params.support_end()) throw DomainError("gpd_cdf: z outside the support");
  if (z == params.support_end()) return 1.0;
  return -std::expm1(-std::log1p(params.xi * z / params.sigma) / params.xi);
}

double gpd_pdf(const GpdParams& params, double z) {
  check_params(params);
  if (!(z >= 0.0) || z >= params.support_end()) return 0.0;
  return std::exp(-(1.0 + 1.0 / params.xi) * std::log1p(params.xi * z / params.sigma)) /
         params.sigma;
}

double gpd_quantile(const GpdParams& params, double p) {
  check_params(params);
  if (!(p >= 0.0) || p >= 1.0) throw DomainError("gpd_quantile: p must lie in [0, 1)");
  return params.sigma / params.xi * std::expm1(-params.xi * std::log1p(-p));
}

double gpd_log_likelihood(double xi, double sigma, std::span<const double> excesses) {
  if (!(sigma > 0.0) || xi == 0.0) return neg_inf;
  const double k = xi / sigma;
  double sum = 0.0;
  for (double y : excesses) {
    const double arg = k * y;
    if (!(arg > -1.0)) return neg_inf;
    sum += std::log1p(arg);
  }
  return -static_cast<double>(excesses.size()) * std::log(sigma) - (1.0 + 1.0 / xi) * sum;
}

GpdParams fit_gpd_mle(std::span<const double> excesses, const FitOptions& options) {
  if (excesses.size() < std::max<std::size_t>(options.min_peaks, 2))
    throw InsufficientData("fit_gpd_mle: " + std::to_string(excesses.size()) +
                           " peaks, need at least " + std::to_string(options.min_peaks));
  for (double y : excesses)
    if (!(y > 0.0) || !std::isfinite(y)) throw InvalidInput("fit_gpd_mle: excesses must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(excesses.begin(), excesses.end());
  if (*hi_it - *lo_it <= 1e-12 * *hi_it) throw DegenerateData("fit_gpd_mle: all excesses identical");

  const GpdLikelihood ll(excesses, options);

  // Coarse profile over xi.
  const int m = std::max(options.xi_grid_points, 3);
  std::vector<double> grid(static_cast<std::size_t>(m));
  std::size_t best = 0;
  double best_value = neg_inf;
  std::vector<ProfilePoint> profile(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = ll.clamp_xi(options.xi_min +
                          (options.xi_max - options.xi_min) * static_cast<double>(i) / (m - 1));
    profile[i] = ll.profile(grid[i], 50);
    if (profile[i].log_likelihood > best_value) {
      best_value = profile[i].log_likelihood;
      best = i;
    }
  }

  // Golden refinement of xi inside the bracket around the best grid node.
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  double xi = grid[best];
  double log_sigma = profile[best].log_sigma;
  if (hi > lo) {
    auto [xi_ref, value] = golden_max(
        [&](double x) { return ll.profile(ll.clamp_xi(x), 50).log_likelihood; }, lo, hi, 30);
    xi_ref = ll.clamp_xi(xi_ref);
    if (value > best_value) {
      xi = xi_ref;
      log_sigma = ll.profile(xi).log_sigma;
    }
  }

  auto [point, value] = nelder_mead(ll, {xi, log_sigma}, options.tolerance);
  GpdParams out;
  out.xi = point[0];
  out.sigma = std::exp(point[1]);
  out.n_peaks = excesses.size();
  out.n_total = excesses.size();
  out.threshold = 0.0;
  if (!std::isfinite(value)) throw NumericalError("fit_gpd_mle: optimizer left the support");
  return out;
}

GpdParams fit_tail(std::span<const double> samples, double threshold, const FitOptions& options) {
  const auto peaks = extract_peaks(samples, threshold);
  GpdParams params = fit_gpd_mle(peaks, options);
  params.n_total = samples.size();
  params.threshold = threshold;
  return params;
}

double risk_boundary(const GpdParams& cost_gpd, double nu) {
  if (!(nu >= 0.0)) throw DomainError("risk_boundary: nu must be nonnegative");
  if (cost_gpd.n_peaks == 0) throw DomainError("risk_boundary: no peaks");
  const double p = nu * static_cast<double>(cost_gpd.n_total) / static_cast<double>(cost_gpd.n_peaks);
  if (p >= 1.0)
    throw ExploitationRangeTooLarge("risk_boundary: nu * n / N_mu = " + std::to_string(p) + " >= 1");
  return cost_gpd.threshold + gpd_quantile(cost_gpd, p);
}

double risk_boundary(const TailModel& model) { return risk_boundary(model.cost_gpd, model.nu); }

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw InvalidInput("ks_statistic: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f),
                  std::abs(static_cast<double>(i) / n - f)});
  }
  return d;
}

double GaussianFit::cdf(double x) const {
  if (std_dev <= 0.0) return x < mean ? 0.0 : 1.0;
  return 0.5 * std::erfc(-(x - mean) / (std_dev * std::sqrt(2.0)));
}

GaussianFit fit_gaussian(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientData("fit_gaussian: need at least 2 samples");
  // Welford update.
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : samples) {
    ++k;
    const double delta = x - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (x - mean);
  }
  return {mean, std::sqrt(std::max(m2, 0.0) / static_cast<double>(k))};
}

double empirical_quantile(std::span<const double> samples, double level) {
  if (samples.empty()) throw InvalidInput("empirical_quantile: no samples");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("empirical_quantile: level outside [0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Transform parse_transform(std::string_view name) {
  if (name == "identity") return Transform::identity;
  throw InvalidInput("unknown tail transform '" + std::string(name) + "'");
}

std::vector<double> apply(Transform, std::span<const double> samples) {
  return {samples.begin(), samples.end()};
}

}  // namespace evo::evt
