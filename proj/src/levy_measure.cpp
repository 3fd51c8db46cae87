#include "pgn/levy_measure.hpp"

#include <cmath>
#include <limits>

#include "pgn/errors.hpp"
#include "pgn/special.hpp"

namespace pgn {

namespace {

// integral of u^e over [lo, hi], 0 < lo <= hi
double power_integral(double lo, double hi, double e) {
    if (hi <= lo) return 0.0;
    if (std::fabs(e + 1.0) < 1e-12) return std::log(hi / lo);
    return (std::pow(hi, e + 1.0) - std::pow(lo, e + 1.0)) / (e + 1.0);
}

void check_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be positive and finite");
}

}  // namespace

double tilt_poly(int n, double x) {
    double term = 1.0;
    double sum = 1.0;
    for (int i = 1; i <= n; ++i) {
        term *= -x / static_cast<double>(i);
        sum += term;
    }
    return sum;
}

LevyMeasure1D::LevyMeasure1D(TruncStable f) : family_(f) {
    check_positive(f.c, "TruncStable.c");
    check_positive(f.r0, "TruncStable.r0");
    if (!(f.a > 0.0 && f.a < 2.0)) throw DomainError("TruncStable.a must lie in (0, 2)");
}

LevyMeasure1D::LevyMeasure1D(LogSingular f) : family_(f) {
    check_positive(f.c, "LogSingular.c");
}

LevyMeasure1D::LevyMeasure1D(TiltedStablePoly f) : family_(f) {
    check_positive(f.b, "TiltedStablePoly.b");
    check_positive(f.r0, "TiltedStablePoly.r0");
    if (!(f.a > 0.0 && f.a < 2.0)) throw DomainError("TiltedStablePoly.a must lie in (0, 2)");
    if (f.n < 1 || f.n % 2 == 0) throw DomainError("TiltedStablePoly.n must be a positive odd integer");
}

LevyMeasure1D::LevyMeasure1D(CustomMeasure f) : family_(std::move(f)) {
    const auto& cm = std::get<CustomMeasure>(family_);
    check_positive(cm.upper_support, "CustomMeasure.upper_support");
    if (!cm.density) throw DomainError("CustomMeasure.density must be callable");
    if (cm.singularity_exponent_hint >= 2.0)
        throw DomainError("CustomMeasure singularity_exponent_hint must be < 2 for square integrability");
    // Square integrability near 0 per the Levy measure definition.
    const double b = std::min(1.0, cm.upper_support);
    auto f2 = [&](double u) { return u * u * cm.density(u); };
    QuadResult q = integrate_power_singular(f2, b, 1.0 - cm.singularity_exponent_hint);
    if (q.divergent || !std::isfinite(q.value))
        throw NonIntegrable("CustomMeasure: integral of u^2 near 0 does not converge");
}

double LevyMeasure1D::density(double u) const {
    if (u <= 0.0) return 0.0;
    return std::visit(
        [u](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                return u < f.r0 ? f.c * std::pow(u, -f.a - 1.0) : 0.0;
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                return u < 1.0 ? f.c * std::log(1.0 / u) / u : 0.0;
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                return u < f.r0 ? std::pow(u, -f.a - 1.0) * tilt_poly(f.n, std::pow(u, f.b)) : 0.0;
            } else {
                return u < f.upper_support ? f.density(u) : 0.0;
            }
        },
        family_);
}

double LevyMeasure1D::upper_support() const {
    return std::visit(
        [](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) return f.r0;
            else if constexpr (std::is_same_v<T, LogSingular>) return 1.0;
            else if constexpr (std::is_same_v<T, TiltedStablePoly>) return f.r0;
            else return f.upper_support;
        },
        family_);
}

double LevyMeasure1D::singularity_exponent() const {
    return std::visit(
        [](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) return f.a;
            else if constexpr (std::is_same_v<T, LogSingular>) return 0.0;
            else if constexpr (std::is_same_v<T, TiltedStablePoly>) return f.a;
            else return f.singularity_exponent_hint;
        },
        family_);
}

bool LevyMeasure1D::infinite_activity() const {
    // Total mass diverges iff the density is at least as singular as u^{-1}.
    return singularity_exponent() >= 0.0;
}

std::string LevyMeasure1D::family_name() const {
    return std::visit(
        [](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) return "trunc_stable";
            else if constexpr (std::is_same_v<T, LogSingular>) return "log_singular";
            else if constexpr (std::is_same_v<T, TiltedStablePoly>) return "tilted_stable_poly";
            else return "custom:" + f.name;
        },
        family_);
}

LevyMeasure1D LevyMeasure1D::custom_from_catalog(const std::string& name,
                                                 const std::map<std::string, double>& params) {
    auto need = [&](const char* key) {
        auto it = params.find(key);
        if (it == params.end()) throw DomainError("catalog density '" + name + "' needs parameter " + key);
        return it->second;
    };
    if (name == "tempered_stable") {
        // c u^{-a-1} e^{-b u} on (0, upper)
        const double c = need("c"), a = need("a"), b = need("b"), upper = need("upper");
        check_positive(c, "tempered_stable.c");
        check_positive(b, "tempered_stable.b");
        check_positive(upper, "tempered_stable.upper");
        if (!(a > 0.0 && a < 2.0)) throw DomainError("tempered_stable.a must lie in (0, 2)");
        CustomMeasure cm;
        cm.name = name;
        cm.params = params;
        cm.density = [c, a, b](double u) { return c * std::pow(u, -a - 1.0) * std::exp(-b * u); };
        cm.upper_support = upper;
        cm.singularity_exponent_hint = a;
        return LevyMeasure1D(cm);
    }
    throw DomainError("unknown catalog density '" + name + "'");
}

nlohmann::json LevyMeasure1D::to_json() const {
    nlohmann::json j;
    std::visit(
        [&j](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                j = {{"family", "trunc_stable"}, {"c", f.c}, {"a", f.a}, {"r0", f.r0}};
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                j = {{"family", "log_singular"}, {"c", f.c}};
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                j = {{"family", "tilted_stable_poly"}, {"a", f.a}, {"b", f.b}, {"n", f.n}, {"r0", f.r0}};
            } else {
                j = {{"family", "custom"}, {"name", f.name}, {"params", f.params}};
            }
        },
        family_);
    return j;
}

LevyMeasure1D LevyMeasure1D::from_json(const nlohmann::json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "trunc_stable") {
        return LevyMeasure1D(TruncStable{j.at("c").get<double>(), j.at("a").get<double>(),
                                         j.at("r0").get<double>()});
    }
    if (family == "log_singular") {
        return LevyMeasure1D(LogSingular{j.at("c").get<double>()});
    }
    if (family == "tilted_stable_poly") {
        return LevyMeasure1D(TiltedStablePoly{j.at("a").get<double>(), j.at("b").get<double>(),
                                              j.at("n").get<int>(), j.at("r0").get<double>()});
    }
    if (family == "custom") {
        return custom_from_catalog(j.at("name").get<std::string>(),
                                   j.at("params").get<std::map<std::string, double>>());
    }
    throw DomainError("unknown Levy measure family '" + family + "'");
}

CumulantVector compute_cumulants(const LevyMeasure1D& measure, double r, int j_max) {
    if (j_max < 2) throw DomainError("compute_cumulants: j_max >= 2 required");
    CumulantVector cv;
    cv.r = r;
    cv.j_max = j_max;
    for (int j = 2; j <= j_max; ++j) {
        const double v = partial_cumulant(measure, j, r);
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError("compute_cumulants: kappa_" + std::to_string(j) +
                              " is nonpositive or nonfinite");
        cv.values[j] = v;
    }
    for (int j = 3; j < j_max; ++j) {
        if (!(cv.values[j] * cv.values[j] < cv.values[j - 1] * cv.values[j + 1]))
            throw DomainError("compute_cumulants: Hoelder consistency failed at order " +
                              std::to_string(j));
    }
    return cv;
}

double partial_cumulant(const LevyMeasure1D& measure, int j, double r) {
    if (j < 2) throw DomainError("partial_cumulant: j >= 2 required");
    if (!(r > 0.0)) {
        if (r == 0.0) return 0.0;
        throw DomainError("partial_cumulant: r > 0 required");
    }
    const double upper = measure.upper_support();
    if (r > upper * (1.0 + 1e-12)) throw DomainError("partial_cumulant: r exceeds the measure support");
    const double reff = std::min(r, upper);
    const double jd = static_cast<double>(j);
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                return f.c * std::pow(reff, jd - f.a) / (jd - f.a);
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                // integral of c u^{j-1} ln(1/u): c r^j (j ln(1/r) + 1) / j^2
                return f.c * std::pow(reff, jd) * (jd * std::log(1.0 / reff) + 1.0) / (jd * jd);
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                // term-wise closed form, exponents j - a + i b
                double term = 1.0;
                double sum = std::pow(reff, jd - f.a) / (jd - f.a);
                for (int i = 1; i <= f.n; ++i) {
                    term *= -1.0 / static_cast<double>(i);
                    const double e = jd - f.a + f.b * static_cast<double>(i);
                    sum += term * std::pow(reff, e) / e;
                }
                return sum;
            } else {
                return partial_cumulant_quad(measure, j, reff);
            }
        },
        measure.family());
}

double partial_cumulant_quad(const LevyMeasure1D& measure, int j, double r,
                             const QuadOptions& opt) {
    if (j < 2) throw DomainError("partial_cumulant_quad: j >= 2 required");
    if (r == 0.0) return 0.0;
    if (!(r > 0.0)) throw DomainError("partial_cumulant_quad: r > 0 required");
    const double reff = std::min(r, measure.upper_support());
    const double s0 = static_cast<double>(j) - measure.singularity_exponent() - 1.0;
    auto f = [&](double u) { return std::pow(u, static_cast<double>(j)) * measure.density(u); };
    QuadResult q = integrate_power_singular(f, reff, s0, opt);
    if (q.divergent || !std::isfinite(q.value))
        throw NonIntegrable("partial_cumulant: quadrature diverges near 0");
    return q.value;
}

double tail_mass(const LevyMeasure1D& measure, double r) {
    if (!(r > 0.0)) throw DomainError("tail_mass: r > 0 required");
    const double upper = measure.upper_support();
    if (r >= upper) return 0.0;
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                return f.c * power_integral(r, f.r0, -f.a - 1.0);
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                const double l = std::log(1.0 / r);
                return f.c * 0.5 * l * l;
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                double term = 1.0;
                double sum = power_integral(r, f.r0, -f.a - 1.0);
                for (int i = 1; i <= f.n; ++i) {
                    term *= -1.0 / static_cast<double>(i);
                    sum += term * power_integral(r, f.r0, -f.a - 1.0 + f.b * static_cast<double>(i));
                }
                return sum;
            } else {
                QuadResult q = integrate([&](double u) { return measure.density(u); }, r, upper);
                return q.value;
            }
        },
        measure.family());
}

double tail_mean(const LevyMeasure1D& measure, double r) {
    if (!(r > 0.0)) throw DomainError("tail_mean: r > 0 required");
    const double upper = measure.upper_support();
    if (r >= upper) return 0.0;
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                return f.c * power_integral(r, f.r0, -f.a);
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                // integral of c ln(1/u) on [r, 1]: c [1 - r - r ln(1/r)]
                return f.c * (1.0 - r - r * std::log(1.0 / r));
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                double term = 1.0;
                double sum = power_integral(r, f.r0, -f.a);
                for (int i = 1; i <= f.n; ++i) {
                    term *= -1.0 / static_cast<double>(i);
                    sum += term * power_integral(r, f.r0, -f.a + f.b * static_cast<double>(i));
                }
                return sum;
            } else {
                QuadResult q = integrate([&](double u) { return u * measure.density(u); }, r, upper);
                return q.value;
            }
        },
        measure.family());
}

double gamma_levy_cumulant(double p, double s, double m, int j) {
    const double jd = static_cast<double>(j);
    if (!(jd + p + 1.0 > 0.0)) throw DomainError("gamma_levy_cumulant: j + p + 1 must be positive");
    if (m == 0.0) return 0.0;
    if (!(s > 0.0) || !(m > 0.0)) throw DomainError("gamma_levy_cumulant: s > 0 and m >= 0 required");
    return std::exp(gamma_levy_cumulant_log(p, std::log(s), std::log(m), jd));
}

double gamma_levy_cumulant_log(double p, double log_s, double log_m, double j) {
    return log_gamma(j + p + 1.0) + log_m + (j + p + 1.0) * log_s;
}

LevyMeasure1D truncated(const LevyMeasure1D& measure, double r) {
    if (!(r > 0.0)) throw DomainError("truncated: r > 0 required");
    const double upper = std::min(r, measure.upper_support());
    return std::visit(
        [&](const auto& f) -> LevyMeasure1D {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, TruncStable>) {
                return LevyMeasure1D(TruncStable{f.c, f.a, upper});
            } else if constexpr (std::is_same_v<T, LogSingular>) {
                if (upper >= 1.0) return measure;
                CustomMeasure cm;
                cm.name = "log_singular_restricted";
                cm.params = {{"c", f.c}, {"upper", upper}};
                const double c = f.c;
                cm.density = [c](double u) { return c * std::log(1.0 / u) / u; };
                cm.upper_support = upper;
                cm.singularity_exponent_hint = 0.0;
                return LevyMeasure1D(cm);
            } else if constexpr (std::is_same_v<T, TiltedStablePoly>) {
                return LevyMeasure1D(TiltedStablePoly{f.a, f.b, f.n, upper});
            } else {
                CustomMeasure cm = f;
                cm.upper_support = upper;
                cm.params["upper"] = upper;
                return LevyMeasure1D(cm);
            }
        },
        measure.family());
}

TiltedDecomposition tilted_decompose(double a, double b) {
    if (!(a > 0.0 && a < 2.0)) throw DomainError("tilted_decompose: a must lie in (0, 2)");
    if (!(b > 0.0)) throw DomainError("tilted_decompose: b > 0 required");
    const double threshold = a / b - 1.0;
    int n = 1;
    while (!(static_cast<double>(n) > threshold)) n += 2;

    // Smallest positive root of f_n: scan then bisect. f_n(0) = 1 and
    // f_n -> -inf for odd n, so a sign change exists.
    double lo = 0.0, hi = 1.0;
    while (tilt_poly(n, hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw RootBracketError("tilted_decompose: no sign change found for f_n");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (tilt_poly(n, mid) > 0.0) lo = mid; else hi = mid;
    }
    const double ustar = 0.5 * (lo + hi);
    const double r0 = std::pow(ustar, 1.0 / b);

    TiltedDecomposition out;
    out.n = n;
    out.r0 = r0;
    out.core = TiltedStablePoly{a, b, n, r0};

    // Remainder density u^{-a-1} [e^{-u^b} - 1{u<r0} f_n(u^b)], which is
    // O(u^{(n+1)b - a - 1}) at 0 and integrable at infinity. Near 0 the
    // bracket cancels catastrophically and the power factor overflows, so
    // factor out x^{n+1} and sum the truncated exponential series.
    auto remainder = [&](double u) {
        const double x = std::pow(u, b);
        if (u < r0 && x < 0.5) {
            double term = 1.0 / std::exp(log_gamma(n + 2.0));
            double psi = term;
            for (int i = 1; i < 60; ++i) {
                term *= -x / static_cast<double>(n + 1 + i);
                psi += term;
                if (std::fabs(term) < 1e-18 * std::fabs(psi)) break;
            }
            const double e = (static_cast<double>(n) + 1.0) * b - a - 1.0;
            return std::exp(e * std::log(u)) * psi;
        }
        const double core = u < r0 ? tilt_poly(n, x) : 0.0;
        return std::pow(u, -a - 1.0) * (std::exp(-x) - core);
    };
    const double s0 = (static_cast<double>(n) + 1.0) * b - a - 1.0;
    QuadResult inner = integrate_power_singular(remainder, r0, s0);
    QuadResult outer = integrate_to_infinity(remainder, r0);
    if (inner.divergent || outer.divergent)
        throw NonIntegrable("tilted_decompose: remainder mass quadrature failed");
    out.residual_mass = inner.value + outer.value;
    return out;
}

}  // namespace pgn
