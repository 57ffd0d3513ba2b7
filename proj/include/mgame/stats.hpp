#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mgame {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Standard normal CDF via erfc; absolute error well below 1e-14.
inline double normal_cdf(double x) {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  return 0.5 * std::erfc(-x / kSqrt2);
}

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// P(eps_other >= t_other | eps_own = t_own) for standard bivariate normal
// with correlation rho.
inline double conditional_exceedance(double t_other, double t_own, double rho) {
  if (!(std::fabs(rho) < 1.0))
    throw std::invalid_argument("conditional_exceedance: |rho| must be < 1");
  if (rho == 0.0) return 1.0 - normal_cdf(t_other);
  const double s = std::sqrt(1.0 - rho * rho);
  return 1.0 - normal_cdf((t_other - rho * t_own) / s);
}

struct QuadratureRule {
  std::vector<double> nodes;    // strictly inside (0,1), increasing
  std::vector<double> weights;  // positive, sum to 1

  template <class F>
  double average(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(nodes[k]);
    return acc;
  }
};

// Gauss-Legendre rule mapped to [0,1] with weights normalized to sum 1,
// so average(f) approximates the mean of f under U[0,1].
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration on Legendre polynomials over [-1,1].
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    // Map node from [-1,1] to [0,1]; total weight 2 maps to 1.
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

// E[max(a + e1, b + e0)] with (e1, e0) independent N(mu1, 1) and N(0, 1).
// Standard identity for the maximum of two normals.
inline double emax_normal(double a, double b, double mu1 = 0.0) {
  const double m = a + mu1;
  const double theta = (m - b) / kSqrt2;
  return m * normal_cdf(theta) + b * normal_cdf(-theta) + kSqrt2 * normal_pdf(theta);
}

// P(a + e1 >= b + e0) under the same shock distribution.
inline double choice_prob(double delta_v, double xi_shift) {
  return normal_cdf((delta_v + xi_shift) / kSqrt2);
}

}  // namespace mgame
