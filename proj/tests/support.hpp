#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "evo/evt.hpp"
#include "evo/rng.hpp"

namespace evo::test {

// Small seeded generator for property tests.
struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
  double normal() { return standard_normal(rng); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1))); }

  std::vector<double> uniforms(std::size_t n, double lo, double hi) {
    std::vector<double> out(n);
    for (auto& x : out) x = uniform(lo, hi);
    return out;
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }

  // A^T A + shift I, well conditioned for moderate shift.
  Eigen::MatrixXd spd(Eigen::Index n, double shift = 0.5) {
    const Eigen::MatrixXd a = normal_matrix(n, n);
    return a.transpose() * a / static_cast<double>(n) + shift * Eigen::MatrixXd::Identity(n, n);
  }

  // Inverse-CDF draws from a GPD.
  std::vector<double> gpd(std::size_t n, double xi, double sigma) {
    std::vector<double> out(n);
    for (auto& x : out) {
      double u = uniform01(rng);
      while (u <= 0.0) u = uniform01(rng);
      x = sigma / xi * (std::pow(u, -xi) - 1.0);
    }
    return out;
  }

  Rng rng;
};

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

inline evt::GpdParams gpd_params(double xi, double sigma, std::size_t n_peaks = 1, std::size_t n_total = 1,
                                 double threshold = 0.0) {
  evt::GpdParams p;
  p.xi = xi;
  p.sigma = sigma;
  p.n_peaks = n_peaks;
  p.n_total = n_total;
  p.threshold = threshold;
  return p;
}

}  // namespace evo::test
