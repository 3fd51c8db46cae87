#pragma once

#include <map>
#include <vector>

#include <json.hpp>

#include "pgn/levy_measure.hpp"
#include "pgn/matching.hpp"
#include "pgn/radial.hpp"

namespace pgn {

/// C1 = sin 1.
double const_C1();

/// C2, the infimum over p > 0 of P{Gamma(p,1) <= p}. The profile decreases
/// monotonically from 1 to its central-limit value 1/2, so the infimum is
/// 1/2; using it keeps the bound valid.
double const_C2();

/// P{Gamma(p,1) <= p}, the profile whose infimum defines C2.
double c2_profile(double p);

/// L(t, r) = (t^2/2) min{C1^2 kappa_{2, X_{1/|t|}}, sigma^2}. The symmetric
/// flag doubles the partial cumulant, matching the two-sided law.
double L_func(double t, double r, const LevyMeasure1D& measure, double sigma,
              bool symmetric = false);

/// sqrt of the r-independent part of Q_j^2: Gamma(j+1/2)/(2 (C1^2 C2)^{j+1/2}).
double qj_floor(int j);

struct QjResult {
    double value = 0.0;        ///< Q_j(r); +inf when flagged divergent
    double tail_integral = 0.0;
    double tail_rel_error = 0.0;
    double truncation_t = 0.0; ///< where the panel sweep stopped
    bool divergent = false;
};

/// Q_j(r)^2 = floor^2 + kappa_{2,X_r}^{j+1/2} * integral_{1/r}^inf t^{2j}
/// e^{-2L(t,r)} dt, the tail integral on doubling panels with truncation
/// once two consecutive panels fall below 1e-16 of the total.
QjResult Qj(const LevyMeasure1D& measure, const MatchedParams& params, int j);

struct BoundReport {
    int q = 0;
    std::map<int, QjResult> Qs;   ///< j in {q-1, q, q+1}
    double abs_cum_X = 0.0;
    double abs_cum_Y = 0.0;
    double kappa2 = 0.0;
    double dtv_bound = 0.0;       ///< +inf when any Q diverges
    bool divergent = false;

    nlohmann::json to_json() const;
};

/// Assembled total-variation bound
/// (|kappa|_{q,X_r} + |kappa|_{q,Y_r}) / (q! kappa_2^{q/2})
///   * [q Q_{q-1} + Q_q + Q_{q+1}].
BoundReport dtv_bound_1d(const LevyMeasure1D& measure, const MatchedParams& params);

/// The r -> 0 form of the bound: same prefactor, Q factors at their floor
/// values. This is the quantity whose log-log slope in r is the decay rate
/// of the bound; the live Q factors converge to the floors only deep in
/// the small-r regime and would otherwise dominate a slope fit.
double dtv_bound_asymptotic(const LevyMeasure1D& measure, const MatchedParams& params);

// ---------------------------------------------------------------------------
// Multivariate diagnostics

/// Smallest eigenvalue of C1^2 A^{-1} M_tau(z) A^{-1} and of
/// tau^2 A^{-1} K A^{-1}, whichever is smaller. A is the symmetric square
/// root of Sigma_tau.
double rho_tau(double z, const RadialField& field, const Eigen::MatrixXd& A);

/// integral of |u A^{-1} theta|_1^q over lambda_tau plus the same over
/// gamma_tau.
double mv_moment_factor(const RadialField& field, const Eigen::MatrixXd& A, int q);

/// h(d) = floor(d/2) + 1.
int h_of_d(int d);

struct MvBoundReport {
    double tau = 0.0;
    int q = 0;
    double moment_factor = 0.0;
    double integral_diag = 0.0;        ///< value of the exponential-decay integral
    bool integral_finite = false;
    double bound_modulo_constant = 0.0;
    double R_bar = 0.0;                ///< ess sup |A^{-1} theta| r_tau(theta)
    double S_bar = 0.0;                ///< ess sup (p+h+1) |A^{-1} theta| s_tau(theta)
    std::vector<std::pair<double, double>> rho_samples;  ///< (z, rho_tau(z))

    nlohmann::json to_json() const;
};

/// Numerically evaluates the decay integral of the multivariate bound and
/// assembles the bound with a unit constant and the plain power surrogate
/// for the unspecified polynomial; reported modulo that constant.
MvBoundReport mv_integral_diag(const RadialField& field, const Eigen::MatrixXd& A, int q);

}  // namespace pgn
