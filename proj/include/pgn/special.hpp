#pragma once

#include <cmath>

namespace pgn {

/// log Gamma(x) for x > 0.
inline double log_gamma(double x) { return std::lgamma(x); }

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
/// a > 0, x >= 0. Series expansion for x < a + 1, continued fraction
/// otherwise (Lentz), relative accuracy ~ 1e-14.
double gamma_p(double a, double x);

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Standard normal density.
inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace pgn
