#include "evo/bounds.hpp"

#include <cmath>

#include "evo/error.hpp"

namespace evo::bounds {

double compute_nu0(const evt::GpdParams& gpd, double tv_term, double gamma) {
  if (tv_term < 0.0) throw DomainError("compute_nu0: tv_term must be non-negative");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("compute_nu0: gamma must lie in (0, 1)");
  if (gpd.n_total == 0 || gpd.n_peaks == 0) throw DomainError("compute_nu0: empty tail");
  const double tail = static_cast<double>(gpd.n_peaks) / static_cast<double>(gpd.n_total);
  if (tv_term == 0.0) return 0.0;
  const double base = gpd.xi * tv_term / (gpd.sigma * (1.0 - gamma)) + 1.0;
  const double survival = base <= 0.0 ? 0.0 : std::pow(base, -1.0 / gpd.xi);
  const double nu0 = tail * (1.0 - survival);
  if (nu0 < 0.0) return 0.0;
  if (nu0 >= tail) return std::nextafter(tail, 0.0);
  return nu0;
}

double estimate_tv_term(double gamma, double eps_c, double delta) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("estimate_tv_term: gamma must lie in (0, 1)");
  if (eps_c < 0.0 || delta < 0.0) throw DomainError("estimate_tv_term: negative input");
  return 2.0 * gamma * eps_c * std::sqrt(delta / 2.0) / (1.0 - gamma);
}

double j_terms(const evt::GpdParams& gpd, double j_c, double advantage_term) {
  return gpd.xi / gpd.sigma * (j_c + advantage_term) + 1.0;
}

double violation_prob_bound(const evt::GpdParams& gpd, double j, double e_term) {
  if (!(j > 0.0)) throw DomainError("violation_prob_bound: J must be positive");
  if (e_term < 0.0) throw DomainError("violation_prob_bound: E must be non-negative");
  return std::pow(j * (e_term + 1.0), -1.0 / gpd.xi);
}

VariancePair variance_pair(double mu, double nu, long long n, double f_h_at_q) {
  if (!(mu > 0.0) || !(nu > 0.0) || !(mu + nu < 1.0)) throw DomainError("variance_pair: need 0 < mu, 0 < nu, mu + nu < 1");
  if (n < 1) throw DomainError("variance_pair: N must be >= 1");
  if (!(f_h_at_q > 0.0)) throw DomainError("variance_pair: density must be positive");
  const double nn = static_cast<double>(n);
  const double rest = 1.0 - mu - nu;
  const double f_c = (1.0 - mu) * f_h_at_q;
  VariancePair out;
  out.omega_evo = nu * rest / (nn * (1.0 - mu) * (1.0 - mu) * f_h_at_q * f_h_at_q);
  out.omega_qr = (mu + nu) * rest / (nn * f_c * f_c);
  return out;
}

}  // namespace evo::bounds
