#pragma once

#include <functional>
#include <map>
#include <string>
#include <variant>

#include "pgn/quadrature.hpp"

#include <json.hpp>

namespace pgn {

/// Truncated one-sided stable family, density c 1{0<u<r0} u^{-a-1}.
struct TruncStable {
    double c;   ///< intensity, > 0
    double a;   ///< stability index, in (0, 2)
    double r0;  ///< truncation radius, > 0
};

/// Logarithmically singular family on (0, 1), density c u^{-1} ln(1/u).
struct LogSingular {
    double c;  ///< intensity, > 0
};

/// Polynomially tilted stable family, density 1{0<u<r0} u^{-a-1} f_n(u^b)
/// with f_n(x) = sum_{i=0}^{n} (-x)^i / i!, n odd.
struct TiltedStablePoly {
    double a;   ///< in (0, 2)
    double b;   ///< tilt exponent, > 0
    int n;      ///< odd polynomial order
    double r0;  ///< positivity radius of f_n(u^b)
};

/// User-supplied density from a named built-in catalog. The hint is the
/// alpha in lambda(du) ~ u^{-alpha-1} du near 0 and steers the quadrature
/// substitution and the infinite-activity check.
struct CustomMeasure {
    std::string name;
    std::map<std::string, double> params;
    std::function<double(double)> density;
    double upper_support;
    double singularity_exponent_hint;
};

/// One-sided Levy measure on (0, upper_support). Construction validates
/// the family parameters; a CustomMeasure additionally gets a quadrature
/// check of the square-integrability near 0.
class LevyMeasure1D {
public:
    using Family = std::variant<TruncStable, LogSingular, TiltedStablePoly, CustomMeasure>;

    explicit LevyMeasure1D(TruncStable f);
    explicit LevyMeasure1D(LogSingular f);
    explicit LevyMeasure1D(TiltedStablePoly f);
    explicit LevyMeasure1D(CustomMeasure f);

    /// Density of the measure at u > 0 (0 outside the support).
    double density(double u) const;

    /// Supremum of the support.
    double upper_support() const;

    /// The alpha in density ~ u^{-alpha-1} near 0.
    double singularity_exponent() const;

    /// True when lambda((0, inf)) is infinite, required for matching.
    bool infinite_activity() const;

    const Family& family() const { return family_; }
    std::string family_name() const;

    /// Build a custom measure from the built-in density catalog.
    /// Known names: "tempered_stable" {c, a, b, upper}.
    static LevyMeasure1D custom_from_catalog(const std::string& name,
                                             const std::map<std::string, double>& params);

    nlohmann::json to_json() const;
    static LevyMeasure1D from_json(const nlohmann::json& j);

private:
    Family family_;
};

/// Partial cumulants of one measure at one truncation radius, orders
/// 2..j_max. Construction checks positivity, finiteness and the Hoelder
/// consistency kappa_j^2 < kappa_{j-1} kappa_{j+1} of the stored values.
struct CumulantVector {
    double r = 0.0;
    int j_max = 2;
    std::map<int, double> values;

    double at(int j) const { return values.at(j); }
};

CumulantVector compute_cumulants(const LevyMeasure1D& measure, double r, int j_max);

/// Partial cumulant kappa_{j, X_r} = integral of u^j over (0, r).
/// Closed forms for the parametric families, adaptive quadrature otherwise.
/// j >= 2 so the integrand suppresses the origin singularity.
double partial_cumulant(const LevyMeasure1D& measure, int j, double r);

/// Same integral, always computed by adaptive quadrature; serves as the
/// independent route against the closed forms.
double partial_cumulant_quad(const LevyMeasure1D& measure, int j, double r,
                             const QuadOptions& opt = {});

/// Mass of the tail lambda([r, upper_support)).
double tail_mass(const LevyMeasure1D& measure, double r);

/// First moment of the tail, integral of u over [r, upper_support).
double tail_mean(const LevyMeasure1D& measure, double r);

/// Cumulant of the Gamma-type Levy density m u^p e^{-u/s}:
/// Gamma(j+p+1) m s^{j+p+1}, evaluated in log space.
double gamma_levy_cumulant(double p, double s, double m, int j);

/// log of gamma_levy_cumulant; preferred when m is stored as a log.
double gamma_levy_cumulant_log(double p, double log_s, double log_m, double j);

/// Result of splitting an exponentially tilted stable density into its
/// polynomially tilted core and a finite-mass remainder.
struct TiltedDecomposition {
    int n;                    ///< smallest odd integer > a/b - 1
    double r0;                ///< positivity radius of f_n(u^b)
    double residual_mass;     ///< mass of the remainder, finite and >= 0
    TiltedStablePoly core;    ///< the PGN-eligible component
};

/// Split density u^{-a-1} e^{-u^b} as tilted polynomial core + compound
/// Poisson remainder.
TiltedDecomposition tilted_decompose(double a, double b);

/// f_n(x) = sum_{i=0}^{n} (-x)^i / i!.
double tilt_poly(int n, double x);

/// The same measure restricted to (0, r): the law of the small-jump part
/// X_r viewed as a measure in its own right.
LevyMeasure1D truncated(const LevyMeasure1D& measure, double r);

}  // namespace pgn
