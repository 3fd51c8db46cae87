#pragma once

#include <functional>

namespace pgn {

/// Result of an adaptive quadrature with an a-posteriori error estimate.
struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;   ///< estimated absolute error
    long evaluations = 0;
    bool converged = false;
    bool divergent = false;   ///< tail panels failed to decay within budget
    double upper_reached = 0.0;  ///< where a semi-infinite panel sweep stopped

    double rel_error() const;
};

struct QuadOptions {
    double rel_tol = 1e-11;
    double abs_tol = 1e-300;      ///< absolute floor, keeps tiny integrals convergent
    int max_intervals = 4000;
};

/// Adaptive Gauss-Kronrod 7-15 on [a, b]. Splits the interval with the
/// largest error estimate until the global estimate meets the tolerance.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& opt = {});

/// Integral of f over (0, b] where f(u) ~ C u^s0 as u -> 0+ with s0 > -1.
/// Substitutes u = b v^k with k chosen from s0 so the transformed integrand
/// has several bounded derivatives at 0, then integrates adaptively.
QuadResult integrate_power_singular(const std::function<double(double)>& f, double b,
                                    double s0, const QuadOptions& opt = {});

/// Integral of f over [a, infinity), a > 0, by geometrically expanding
/// panels. Truncates when two consecutive panels each contribute less than
/// tail_cut of the accumulated value; flags divergence when the panel
/// budget is exhausted without decay.
QuadResult integrate_to_infinity(const std::function<double(double)>& f, double a,
                                 const QuadOptions& opt = {}, double tail_cut = 1e-16,
                                 int max_panels = 10000);

}  // namespace pgn
