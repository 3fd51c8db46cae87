#include "pgn/matching.hpp"

#include <cmath>
#include <sstream>

#include "pgn/errors.hpp"
#include "pgn/special.hpp"

namespace pgn {

namespace {

void require_infinite_activity(const LevyMeasure1D& measure) {
    if (!measure.infinite_activity())
        throw MatchInfeasible("measure has finite total mass; PGN matching needs infinite activity");
}

double kappa_or_throw(const LevyMeasure1D& measure, int j, double r, bool symmetric) {
    double k = partial_cumulant(measure, j, r);
    if (symmetric) k *= 2.0;
    if (!(k > 0.0) || !std::isfinite(k)) {
        std::ostringstream os;
        os << "kappa_" << j << " is nonpositive or nonfinite at r = " << r;
        throw DomainError(os.str());
    }
    return k;
}

void fill_residuals(MatchedParams& mp) {
    for (auto& [j, kx] : mp.kappas) {
        if (j >= mp.q) continue;
        if (mp.symmetric && j % 2 == 1) continue;
        mp.residuals[j] = std::fabs(kx - mp.kappa_T(j)) / kx;
    }
}

}  // namespace

double MatchedParams::kappa_Y(int j) const {
    if (symmetric && j % 2 == 1) return 0.0;  // odd orders cancel between the two sides
    double v = std::exp(gamma_levy_cumulant_log(p, std::log(s), log_m, static_cast<double>(j)));
    return symmetric ? 2.0 * v : v;
}

double MatchedParams::kappa_T(int j) const {
    return kappa_Y(j) + (j == 2 ? sigma * sigma : 0.0);
}

nlohmann::json MatchedParams::to_json() const {
    nlohmann::json jk, jres;
    for (auto& [j, v] : kappas) jk[std::to_string(j)] = v;
    for (auto& [j, v] : residuals) jres[std::to_string(j)] = v;
    return {
        {"p", p},       {"s", s},
        {"m", m},       {"log_m", log_m},
        {"sigma", sigma}, {"r", r},
        {"q", q},       {"symmetric", symmetric},
        {"kappas", jk}, {"residuals", jres},
    };
}

MatchedParams MatchedParams::from_json(const nlohmann::json& j) {
    MatchedParams mp;
    mp.p = j.at("p").get<double>();
    mp.s = j.at("s").get<double>();
    mp.log_m = j.at("log_m").get<double>();
    mp.m = j.contains("m") ? j.at("m").get<double>() : std::exp(mp.log_m);
    mp.sigma = j.at("sigma").get<double>();
    mp.r = j.at("r").get<double>();
    mp.q = j.at("q").get<int>();
    mp.symmetric = j.at("symmetric").get<bool>();
    if (j.contains("kappas"))
        for (auto& [key, v] : j.at("kappas").items()) mp.kappas[std::stoi(key)] = v.get<double>();
    if (j.contains("residuals"))
        for (auto& [key, v] : j.at("residuals").items()) mp.residuals[std::stoi(key)] = v.get<double>();
    return mp;
}

MatchedParams match4(const LevyMeasure1D& measure, double r, double p) {
    require_infinite_activity(measure);
    if (!(p >= -1.0)) throw DomainError("match4: p >= -1 required");
    const double k2 = kappa_or_throw(measure, 2, r, false);
    const double k3 = kappa_or_throw(measure, 3, r, false);
    const double k4 = kappa_or_throw(measure, 4, r, false);

    const double ratio = k2 * k4 / (k3 * k3);
    if (!((p + 4.0) / (p + 3.0) < ratio)) {
        std::ostringstream os;
        os << "fourth-order feasibility failed: (p+4)/(p+3) = " << (p + 4.0) / (p + 3.0)
           << " >= kappa2*kappa4/kappa3^2 = " << ratio;
        throw MatchInfeasible(os.str());
    }

    MatchedParams mp;
    mp.p = p;
    mp.r = r;
    mp.q = 5;
    mp.symmetric = false;
    mp.s = k4 / ((p + 4.0) * k3);
    mp.log_m = std::log(k3) - log_gamma(p + 4.0) - (p + 4.0) * std::log(mp.s);
    mp.m = std::exp(mp.log_m);
    const double k2Y = (p + 4.0) * k3 * k3 / ((p + 3.0) * k4);
    mp.sigma = std::sqrt(k2 - k2Y);
    mp.kappas = {{2, k2}, {3, k3}, {4, k4}};
    fill_residuals(mp);
    return mp;
}

MatchedParams match5(const LevyMeasure1D& measure, double r) {
    require_infinite_activity(measure);
    const double k3 = kappa_or_throw(measure, 3, r, false);
    const double k4 = kappa_or_throw(measure, 4, r, false);
    const double k5 = kappa_or_throw(measure, 5, r, false);
    const double rho = k3 * k5 / (k4 * k4);
    if (!(rho > 1.0 && rho < 4.0 / 3.0)) {
        std::ostringstream os;
        os << "fifth-order feasibility failed: kappa3*kappa5/kappa4^2 = " << rho
           << " outside (1, 4/3)";
        throw MatchInfeasible(os.str());
    }
    const double p = 1.0 / (rho - 1.0) - 4.0;
    MatchedParams mp = match4(measure, r, p);  // rechecks the fourth-order condition at this p
    mp.q = 6;
    mp.kappas[5] = k5;
    fill_residuals(mp);
    return mp;
}

MatchedParams match_sym7(const LevyMeasure1D& measure, double r, double p) {
    require_infinite_activity(measure);
    if (!(p >= -1.0)) throw DomainError("match_sym7: p >= -1 required");
    const double k2 = kappa_or_throw(measure, 2, r, true);
    const double k4 = kappa_or_throw(measure, 4, r, true);
    const double k6 = kappa_or_throw(measure, 6, r, true);

    const double lhs = (p + 5.0) * (p + 6.0) / ((p + 3.0) * (p + 4.0));
    const double rhs = k2 * k6 / (k4 * k4);
    if (!(lhs < rhs)) {
        std::ostringstream os;
        os << "symmetric feasibility failed: (p+5)(p+6)/((p+3)(p+4)) = " << lhs
           << " >= kappa2*kappa6/kappa4^2 = " << rhs;
        throw MatchInfeasible(os.str());
    }

    MatchedParams mp;
    mp.p = p;
    mp.r = r;
    mp.q = 8;
    mp.symmetric = true;
    mp.s = std::sqrt(k6 / ((p + 5.0) * (p + 6.0) * k4));
    mp.log_m = std::log(k4) - std::log(2.0) - log_gamma(p + 5.0) - (p + 5.0) * std::log(mp.s);
    mp.m = std::exp(mp.log_m);
    // kappa_{2,Y} = 2 Gamma(p+3) m s^{p+3} = kappa4^2 (p+5)(p+6) / ((p+3)(p+4) kappa6)
    const double k2Y = k4 * k4 * (p + 5.0) * (p + 6.0) / ((p + 3.0) * (p + 4.0) * k6);
    mp.sigma = std::sqrt(k2 - k2Y);
    mp.kappas = {{2, k2}, {4, k4}, {6, k6}};
    fill_residuals(mp);
    return mp;
}

MatchedParams match_sym9(const LevyMeasure1D& measure, double r) {
    require_infinite_activity(measure);
    const double k4 = kappa_or_throw(measure, 4, r, true);
    const double k6 = kappa_or_throw(measure, 6, r, true);
    const double k8 = kappa_or_throw(measure, 8, r, true);
    const double h = k4 * k8 / (k6 * k6);
    if (!(h > 1.0 && h < 56.0 / 30.0)) {
        std::ostringstream os;
        os << "ninth-order feasibility failed: kappa4*kappa8/kappa6^2 = " << h
           << " outside (1, 56/30)";
        throw MatchInfeasible(os.str());
    }
    // (p+7)(p+8) = h (p+5)(p+6) reduces to the quadratic
    // (h-1) p^2 + (11h-15) p + (30h-56) = 0; the positive root is unique.
    const double A = h - 1.0;
    const double B = 11.0 * h - 15.0;
    const double C = 30.0 * h - 56.0;
    const double disc = B * B - 4.0 * A * C;
    if (!(disc > 0.0)) throw RootBracketError("ninth-order fit: quadratic discriminant is degenerate");
    const double p = (-B + std::sqrt(disc)) / (2.0 * A);
    if (!(p > -1.0) || !std::isfinite(p))
        throw RootBracketError("ninth-order fit: solved p is not admissible");

    MatchedParams mp = match_sym7(measure, r, p);  // rechecks the order-7 condition at this p
    mp.q = 10;
    mp.kappas[8] = k8;
    fill_residuals(mp);
    return mp;
}

double stable_p_asym(double a) {
    if (!(a > 0.0 && a < 2.0)) throw DomainError("stable_p_asym: a must lie in (0, 2)");
    return a * a - 8.0 * a + 11.0;
}

double stable_p_sym(double a) {
    if (!(a > 0.0 && a < 2.0)) throw DomainError("stable_p_sym: a must lie in (0, 2)");
    const double h = (6.0 - a) * (6.0 - a) / ((4.0 - a) * (8.0 - a));
    const double A = h - 1.0;
    const double B = 11.0 * h - 15.0;
    const double C = 30.0 * h - 56.0;
    const double disc = B * B - 4.0 * A * C;
    return (-B + std::sqrt(disc)) / (2.0 * A);
}

MatchedParams match_auto(const LevyMeasure1D& measure, double r, bool symmetric,
                         bool allow_fallback, std::string* warning) {
    if (const auto* ts = std::get_if<TruncStable>(&measure.family())) {
        // Closed-form exponent, radius independent; it carries the matching
        // one order beyond the generic fit (through 5, or 9 when symmetric).
        if (symmetric) {
            MatchedParams mp = match_sym7(measure, r, stable_p_sym(ts->a));
            mp.q = 10;
            mp.kappas[8] = 2.0 * partial_cumulant(measure, 8, r);
            for (int j : {4, 6, 8})
                mp.residuals[j] = std::fabs(mp.kappas[j] - mp.kappa_T(j)) / mp.kappas[j];
            return mp;
        }
        MatchedParams mp = match4(measure, r, stable_p_asym(ts->a));
        mp.q = 6;
        mp.kappas[5] = partial_cumulant(measure, 5, r);
        for (int j : {3, 4, 5})
            mp.residuals[j] = std::fabs(mp.kappas[j] - mp.kappa_T(j)) / mp.kappas[j];
        return mp;
    }
    if (symmetric) {
        try {
            return match_sym9(measure, r);
        } catch (const MatchInfeasible& e) {
            if (!allow_fallback) throw;
            if (warning) *warning = std::string("order 9 infeasible (") + e.what() + "), retrying order 7";
            // Retry with a generic large exponent; feasible for all large p.
            for (double p : {8.0, 16.0, 32.0, 64.0, 128.0}) {
                try {
                    return match_sym7(measure, r, p);
                } catch (const MatchInfeasible&) {
                }
            }
            throw;
        }
    }
    try {
        return match5(measure, r);
    } catch (const MatchInfeasible& e) {
        if (!allow_fallback) throw;
        if (warning) *warning = std::string("order 5 infeasible (") + e.what() + "), retrying order 4";
        for (double p : {8.0, 16.0, 32.0, 64.0, 128.0}) {
            try {
                return match4(measure, r, p);
            } catch (const MatchInfeasible&) {
            }
        }
        throw;
    }
}

}  // namespace pgn
