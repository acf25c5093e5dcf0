#pragma once

// Orthonormal shifted Legendre polynomials on [0,1] and Gauss-Legendre rules.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace rknfc {

namespace detail {

inline void check_unit_interval(double x, const char* who) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw InvalidArgument(std::string(who) + ": x = " + std::to_string(x) +
                          " is outside [0,1]");
  }
}

inline void check_degree(int j, const char* who) {
  if (j < 0) {
    throw InvalidArgument(std::string(who) + ": negative degree " + std::to_string(j));
  }
}

}  // namespace detail

/// Values P̂_0(x), ..., P̂_n(x) of the orthonormal shifted Legendre family.
///
/// The classical three-term recurrence is run on y = 2x - 1 and each value is
/// rescaled by sqrt(2j + 1), so that ∫₀¹ P̂_i P̂_j = δ_ij.
inline Eigen::VectorXd legendre_values(int n, double x) {
  detail::check_degree(n, "legendre_values");
  detail::check_unit_interval(x, "legendre_values");
  Eigen::VectorXd out(n + 1);
  const double y = 2.0 * x - 1.0;
  double prev = 0.0;
  double cur = 1.0;
  out[0] = 1.0;
  for (int m = 0; m < n; ++m) {
    const double next = ((2.0 * m + 1.0) * y * cur - m * prev) / (m + 1.0);
    prev = cur;
    cur = next;
    out[m + 1] = std::sqrt(2.0 * (m + 1) + 1.0) * cur;
  }
  return out;
}

/// P̂_j(x) for x in [0,1].
inline double eval_legendre(int j, double x) {
  detail::check_degree(j, "eval_legendre");
  return legendre_values(j, x)[j];
}

/// ξ_m = 1 / (2 sqrt(4m² - 1)), the coupling constant of the integration
/// recurrence of the orthonormal shifted family.
inline double xi(int m) {
  if (m < 1) {
    throw InvalidArgument("xi: m must be >= 1, got " + std::to_string(m));
  }
  const double mm = static_cast<double>(m);
  return 1.0 / (2.0 * std::sqrt(4.0 * mm * mm - 1.0));
}

/// ∫₀ˣ P̂_j(t) dt, expressed through neighbouring basis functions:
///   ∫P̂₀ = ξ₁P̂₁ + ½P̂₀,   ∫P̂_m = ξ_{m+1}P̂_{m+1} − ξ_m P̂_{m−1}.
inline double integrated_legendre(int j, double x) {
  detail::check_degree(j, "integrated_legendre");
  detail::check_unit_interval(x, "integrated_legendre");
  const Eigen::VectorXd p = legendre_values(j + 1, x);
  if (j == 0) {
    return xi(1) * p[1] + 0.5 * p[0];
  }
  return xi(j + 1) * p[j + 1] - xi(j) * p[j - 1];
}

/// The basis truncated at a maximum degree.
struct LegendreBasis {
  int max_degree = 0;

  explicit LegendreBasis(int max_deg) : max_degree(max_deg) {
    detail::check_degree(max_deg, "LegendreBasis");
  }

  double operator()(int j, double x) const {
    if (j > max_degree) {
      throw InvalidArgument("LegendreBasis: degree " + std::to_string(j) +
                            " exceeds max_degree " + std::to_string(max_degree));
    }
    return eval_legendre(j, x);
  }

  Eigen::VectorXd values(double x) const { return legendre_values(max_degree, x); }
};

/// Quadrature nodes c (ascending, in [0,1]) and positive weights b.
struct QuadratureRule {
  Eigen::VectorXd c;
  Eigen::VectorXd b;

  int k() const noexcept { return static_cast<int>(c.size()); }
};

inline constexpr int kMaxGaussNodes = 32;

/// k-point Gauss-Legendre rule mapped to [0,1], nodes in ascending order.
///
/// Roots of P_k are found by Newton's method from Chebyshev-like initial
/// guesses and mirrored about the midpoint.
inline QuadratureRule gauss_legendre_rule(int k) {
  if (k < 1 || k > kMaxGaussNodes) {
    throw InvalidArgument("gauss_legendre_rule: k must be in [1, " +
                          std::to_string(kMaxGaussNodes) + "], got " + std::to_string(k));
  }
  QuadratureRule rule;
  rule.c.resize(k);
  rule.b.resize(k);
  const int half = (k + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (k + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0;
      double p0 = 0.0;
      for (int j = 1; j <= k; ++j) {
        const double p2 = p0;
        p0 = p1;
        p1 = ((2.0 * j - 1.0) * z * p0 - (j - 1.0) * p2) / j;
      }
      dp = k * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) <= 1e-16) break;
    }
    // derivative at the final root for the weight
    {
      double p1 = 1.0;
      double p0 = 0.0;
      for (int j = 1; j <= k; ++j) {
        const double p2 = p0;
        p0 = p1;
        p1 = ((2.0 * j - 1.0) * z * p0 - (j - 1.0) * p2) / j;
      }
      dp = k * (z * p1 - p0) / (z * z - 1.0);
    }
    const double w = 1.0 / ((1.0 - z * z) * dp * dp);
    rule.c[i] = 0.5 - 0.5 * z;
    rule.c[k - 1 - i] = 0.5 + 0.5 * z;
    rule.b[i] = w;
    rule.b[k - 1 - i] = w;
  }
  if (k % 2 == 1) rule.c[k / 2] = 0.5;
  return rule;
}

}  // namespace rknfc
