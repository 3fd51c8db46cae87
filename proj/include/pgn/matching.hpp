#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "pgn/levy_measure.hpp"

namespace pgn {

/// Fitted parameters of the Gamma-plus-Gaussian approximant T_r for one
/// truncation radius. For symmetric fits every cumulant stored or matched
/// refers to the two-sided law (even-order values doubled relative to the
/// one-sided factor) and sigma is the total Gaussian standard deviation.
struct MatchedParams {
    double p = 0.0;       ///< Gamma-density exponent, >= -1
    double s = 0.0;       ///< scale, > 0
    double m = 0.0;       ///< intensity (may overflow for extreme fits; log_m is primary)
    double log_m = 0.0;
    double sigma = 0.0;   ///< Gaussian standard deviation, >= 0
    double r = 0.0;       ///< truncation radius
    int q = 0;            ///< cumulants agree for 2 <= j < q
    bool symmetric = false;

    std::map<int, double> kappas;     ///< cumulants of X_r used by the fit
    std::map<int, double> residuals;  ///< relative matching residuals per order

    /// Cumulant of the fitted Y_r at order j (doubled when symmetric).
    double kappa_Y(int j) const;
    /// Cumulant of T_r = Y_r + sigma Z at order j.
    double kappa_T(int j) const;

    nlohmann::json to_json() const;
    static MatchedParams from_json(const nlohmann::json& j);
};

/// Fourth-order fit at a caller-chosen exponent p >= -1 (q = 5).
MatchedParams match4(const LevyMeasure1D& measure, double r, double p);

/// Fifth-order fit; p is solved from the cumulant ratio (q = 6).
MatchedParams match5(const LevyMeasure1D& measure, double r);

/// Symmetric fit through order 7 at a caller-chosen p (q = 8). The measure
/// is the one-sided factor of X = X1 - X2.
MatchedParams match_sym7(const LevyMeasure1D& measure, double r, double p);

/// Symmetric fit through order 9; p is solved from the exact quadratic
/// (q = 10).
MatchedParams match_sym9(const LevyMeasure1D& measure, double r);

/// Closed-form exponent a^2 - 8a + 11 for the truncated stable family.
double stable_p_asym(double a);

/// Unique positive solution of (p+7)(p+8)/((p+5)(p+6)) = (6-a)^2/((4-a)(8-a)).
double stable_p_sym(double a);

/// Radius-independent default fit: closed-form p for TruncStable, solved p
/// otherwise. Falls back from order 9 to 7 (symmetric) or 5 to nothing
/// (asymmetric) only when allow_fallback is set.
MatchedParams match_auto(const LevyMeasure1D& measure, double r, bool symmetric,
                         bool allow_fallback = false, std::string* warning = nullptr);

}  // namespace pgn
