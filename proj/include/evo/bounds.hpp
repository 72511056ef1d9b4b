#pragma once

#include "evo/evt.hpp"

namespace evo::bounds {

// Zero-violation exploitation range
//   nu0 = (N_mu/n) (1 - (xi tv / (sigma (1 - gamma)) + 1)^(-1/xi)),
// kept inside [0, N_mu/n).
double compute_nu0(const evt::GpdParams& gpd, double tv_term, double gamma);

// 2 gamma eps_c sqrt(delta/2) / (1 - gamma), using Pinsker with the trust
// region as the KL budget.
double estimate_tv_term(double gamma, double eps_c, double delta);

// (J (E + 1))^(-1/xi). Throws DomainError for J <= 0 or E < 0.
double violation_prob_bound(const evt::GpdParams& gpd, double j_terms, double e_term);

// J = (xi/sigma) (J_C + advantage term) + 1.
double j_terms(const evt::GpdParams& gpd, double j_c, double advantage_term);

struct VariancePair {
  double omega_evo = 0.0;
  double omega_qr = 0.0;
};

// Asymptotic variances of the tail-quantile and plain-quantile estimators.
VariancePair variance_pair(double mu, double nu, long long n, double f_h_at_q);

}  // namespace evo::bounds
