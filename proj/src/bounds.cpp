#include "pgn/bounds.hpp"

#include <cmath>
#include <limits>

#include "pgn/errors.hpp"
#include "pgn/special.hpp"

namespace pgn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// kappa_{2, X_u} as a function of the truncation radius u, fast enough to
// sit inside the Q_j integrand. Closed forms for the parametric families;
// custom densities go through a log-log table with power extension below
// the smallest node.
class Kappa2Curve {
public:
    Kappa2Curve(const LevyMeasure1D& measure, bool symmetric)
        : measure_(&measure), scale_(symmetric ? 2.0 : 1.0), upper_(measure.upper_support()) {
        custom_ = std::holds_alternative<CustomMeasure>(measure.family());
        if (custom_) {
            const int n = 256;
            const double lo = upper_ * 1e-9;
            log_u_.reserve(n);
            log_k_.reserve(n);
            for (int i = 0; i < n; ++i) {
                const double u = lo * std::pow(upper_ / lo, static_cast<double>(i) / (n - 1));
                log_u_.push_back(std::log(u));
                log_k_.push_back(std::log(partial_cumulant(*measure_, 2, u)));
            }
        }
    }

    double operator()(double u) const {
        u = std::min(u, upper_);
        if (!custom_) return scale_ * partial_cumulant(*measure_, 2, u);
        const double lu = std::log(u);
        if (lu <= log_u_.front()) {
            // power extension with the singularity exponent
            const double slope = 2.0 - measure_->singularity_exponent();
            return scale_ * std::exp(log_k_.front() + slope * (lu - log_u_.front()));
        }
        auto it = std::upper_bound(log_u_.begin(), log_u_.end(), lu);
        const std::size_t hi = std::min<std::size_t>(it - log_u_.begin(), log_u_.size() - 1);
        const std::size_t lo = hi - 1;
        const double t = (lu - log_u_[lo]) / (log_u_[hi] - log_u_[lo]);
        return scale_ * std::exp(log_k_[lo] + t * (log_k_[hi] - log_k_[lo]));
    }

private:
    const LevyMeasure1D* measure_;
    double scale_;
    double upper_;
    bool custom_ = false;
    std::vector<double> log_u_, log_k_;
};

}  // namespace

double const_C1() { return std::sin(1.0); }

double const_C2() { return 0.5; }

double c2_profile(double p) { return gamma_p(p, p); }

double L_func(double t, double r, const LevyMeasure1D& measure, double sigma, bool symmetric) {
    (void)r;
    if (t == 0.0) return 0.0;
    const double at = std::fabs(t);
    const double c1 = const_C1();
    const double scale = symmetric ? 2.0 : 1.0;
    const double k2 = scale * partial_cumulant(measure, 2, std::min(1.0 / at, measure.upper_support()));
    return 0.5 * t * t * std::min(c1 * c1 * k2, sigma * sigma);
}

double qj_floor(int j) {
    const double c = const_C1() * const_C1() * const_C2();
    const double jd = static_cast<double>(j);
    return std::sqrt(std::exp(log_gamma(jd + 0.5)) / (2.0 * std::pow(c, jd + 0.5)));
}

QjResult Qj(const LevyMeasure1D& measure, const MatchedParams& params, int j) {
    if (j < 1) throw DomainError("Qj: j >= 1 required");
    if (j > params.q + 1) throw DomainError("Qj: j exceeds q + 1 for this fit");
    QjResult res;
    const double r = params.r;
    const double sigma2 = params.sigma * params.sigma;
    const double c1sq = const_C1() * const_C1();
    const Kappa2Curve kappa2_at(measure, params.symmetric);
    const double k2r = kappa2_at(r);

    // integrand t^{2j} e^{-2L(t,r)} through its exponent, immune to the
    // intermediate overflow of t^{2j}
    auto f = [&](double t) {
        const double two_l = t * t * std::min(c1sq * kappa2_at(1.0 / t), sigma2);
        const double expo = 2.0 * j * std::log(t) - two_l;
        return expo < -745.0 ? 0.0 : std::exp(expo);
    };
    QuadOptions opt;
    opt.rel_tol = 1e-9;
    QuadResult tail = integrate_to_infinity(f, 1.0 / r, opt, 1e-16, 10000);
    res.tail_integral = tail.value;
    res.tail_rel_error = tail.rel_error();
    res.truncation_t = tail.upper_reached;
    if (tail.divergent || !std::isfinite(tail.value)) {
        res.divergent = true;
        res.value = kInf;
        return res;
    }
    const double floor = qj_floor(j);
    const double jd = static_cast<double>(j);
    res.value = std::sqrt(floor * floor + std::pow(k2r, jd + 0.5) * tail.value);
    return res;
}

nlohmann::json BoundReport::to_json() const {
    nlohmann::json jq;
    for (const auto& [j, qr] : Qs) {
        jq[std::to_string(j)] = {{"value", qr.value},
                                 {"tail_integral", qr.tail_integral},
                                 {"tail_rel_error", qr.tail_rel_error},
                                 {"truncation_t", qr.truncation_t},
                                 {"divergent", qr.divergent}};
    }
    return {{"q", q},
            {"Q", jq},
            {"abs_cum_X", abs_cum_X},
            {"abs_cum_Y", abs_cum_Y},
            {"kappa2", kappa2},
            {"dtv_bound", dtv_bound},
            {"divergent", divergent}};
}

namespace {

void check_bound_hypotheses(const MatchedParams& params) {
    if (params.q < 5) throw HypothesisViolated("bound needs a fit of order q >= 5");
    if (!(params.s < params.r / (params.p + 3.0)))
        throw HypothesisViolated("bound needs s < r/(p+3)");
    if (!(params.sigma > 0.0)) throw HypothesisViolated("bound needs sigma > 0");
}

double bound_prefactor(const LevyMeasure1D& measure, const MatchedParams& params,
                       double* abs_x, double* abs_y, double* k2out) {
    const double scale = params.symmetric ? 2.0 : 1.0;
    const int q = params.q;
    const double ax = scale * partial_cumulant(measure, q, params.r);
    const double ay = scale * std::exp(gamma_levy_cumulant_log(params.p, std::log(params.s),
                                                               params.log_m, q));
    const double k2 = scale * partial_cumulant(measure, 2, params.r);
    if (abs_x) *abs_x = ax;
    if (abs_y) *abs_y = ay;
    if (k2out) *k2out = k2;
    return (ax + ay) / (std::exp(log_gamma(q + 1.0)) * std::pow(k2, 0.5 * q));
}

}  // namespace

BoundReport dtv_bound_1d(const LevyMeasure1D& measure, const MatchedParams& params) {
    check_bound_hypotheses(params);
    BoundReport rep;
    rep.q = params.q;
    const double pref = bound_prefactor(measure, params, &rep.abs_cum_X, &rep.abs_cum_Y,
                                        &rep.kappa2);
    double qsum = 0.0;
    for (int j : {params.q - 1, params.q, params.q + 1}) {
        QjResult qr = Qj(measure, params, j);
        rep.divergent = rep.divergent || qr.divergent;
        qsum += (j == params.q - 1 ? static_cast<double>(params.q) : 1.0) * qr.value;
        rep.Qs[j] = std::move(qr);
    }
    rep.dtv_bound = rep.divergent ? kInf : pref * qsum;
    return rep;
}

double dtv_bound_asymptotic(const LevyMeasure1D& measure, const MatchedParams& params) {
    check_bound_hypotheses(params);
    const int q = params.q;
    const double pref = bound_prefactor(measure, params, nullptr, nullptr, nullptr);
    return pref * (q * qj_floor(q - 1) + qj_floor(q) + qj_floor(q + 1));
}

// ---------------------------------------------------------------------------
// Multivariate

double rho_tau(double z, const RadialField& field, const Eigen::MatrixXd& A) {
    if (!(z > 0.0)) throw DomainError("rho_tau: z > 0 required");
    const auto& spec = field.spec;
    const int d = spec.dim();
    const Eigen::MatrixXd Ainv = A.inverse();

    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    spec.nu.nodes(th, w);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double av = spec.a(th[i]);
        const double cap = std::min(field.r_tau(th[i]), z / (Ainv * th[i]).norm());
        M += w[i] * spec.c(th[i]) * std::pow(cap, 2.0 - av) / (2.0 - av) * th[i] *
             th[i].transpose();
    }
    const double c1sq = const_C1() * const_C1();
    Eigen::MatrixXd cand1 = c1sq * Ainv * M * Ainv;
    Eigen::MatrixXd cand2 = field.tau * field.tau * Ainv * field.K * Ainv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(cand1), e2(cand2);
    return std::min(e1.eigenvalues().minCoeff(), e2.eigenvalues().minCoeff());
}

double mv_moment_factor(const RadialField& field, const Eigen::MatrixXd& A, int q) {
    if (q < 5) throw DomainError("mv_moment_factor: q >= 5 required");
    const auto& spec = field.spec;
    const Eigen::MatrixXd Ainv = A.inverse();
    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    spec.nu.nodes(th, w);
    const double qd = static_cast<double>(q);
    double total = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double av = spec.a(th[i]);
        const double rt = field.r_tau(th[i]);
        const double lam_q = spec.c(th[i]) * std::pow(rt, qd - av) / (qd - av);
        const double gam_q = std::exp(gamma_levy_cumulant_log(
            field.p_tau(th[i]), std::log(field.s_tau(th[i])), field.log_m_tau(th[i]), qd));
        const double l1 = (Ainv * th[i]).lpNorm<1>();
        total += w[i] * std::pow(l1, qd) * (lam_q + gam_q);
    }
    return total;
}

int h_of_d(int d) { return d / 2 + 1; }

nlohmann::json MvBoundReport::to_json() const {
    nlohmann::json rho = nlohmann::json::array();
    for (const auto& [z, v] : rho_samples) rho.push_back({{"z", z}, {"rho", v}});
    return {{"tau", tau},
            {"q", q},
            {"moment_factor", moment_factor},
            {"integral_diag", integral_diag},
            {"integral_finite", integral_finite},
            {"bound_modulo_constant", bound_modulo_constant},
            {"R_bar", R_bar},
            {"S_bar", S_bar},
            {"modulo_constant", true},
            {"rho", rho}};
}

MvBoundReport mv_integral_diag(const RadialField& field, const Eigen::MatrixXd& A, int q) {
    MvBoundReport rep;
    rep.tau = field.tau;
    rep.q = q;
    const auto& spec = field.spec;
    const int d = spec.dim();
    const int h = h_of_d(d);
    const Eigen::MatrixXd Ainv = A.inverse();

    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    spec.nu.nodes(th, w);
    double rbar = 0.0, sbar = 0.0;
    for (const auto& t : th) {
        const double an = (Ainv * t).norm();
        rbar = std::max(rbar, an * field.r_tau(t));
        sbar = std::max(sbar, (field.p_tau(t) + h + 1.0) * an * field.s_tau(t));
    }
    rep.R_bar = rbar;
    rep.S_bar = sbar;

    // rho on a monotone log grid in z with saturation above z = R_bar and
    // log-log slope extension below the smallest node.
    const int nodes = 128;
    const double z_hi = rbar;
    const double z_lo = rbar * 1e-6;
    std::vector<double> logz(nodes), logrho(nodes);
    for (int i = 0; i < nodes; ++i) {
        const double z = z_lo * std::pow(z_hi / z_lo, static_cast<double>(i) / (nodes - 1));
        logz[i] = std::log(z);
        logrho[i] = std::log(rho_tau(z, field, A));
        rep.rho_samples.emplace_back(z, std::exp(logrho[i]));
    }
    const double rho_sat = rho_tau(z_hi * 2.0, field, A);
    const double low_slope = (logrho[1] - logrho[0]) / (logz[1] - logz[0]);
    auto rho_interp = [&](double z) {
        const double lz = std::log(z);
        if (lz >= logz.back()) return rho_sat;
        if (lz <= logz.front())
            return std::exp(logrho.front() + low_slope * (lz - logz.front()));
        auto it = std::upper_bound(logz.begin(), logz.end(), lz);
        const std::size_t hi_i = std::min<std::size_t>(it - logz.begin(), logz.size() - 1);
        const std::size_t lo_i = hi_i - 1;
        const double t = (lz - logz[lo_i]) / (logz[hi_i] - logz[lo_i]);
        return std::exp(logrho[lo_i] + t * (logrho[hi_i] - logrho[lo_i]));
    };

    const double power = 2.0 * q + 2.0 * h + d - 1.0;
    auto integrand = [&](double s) {
        const double expo = power * std::log(s) - rho_interp(1.0 / s) * s * s;
        return expo < -745.0 ? 0.0 : std::exp(expo);
    };
    // head [0, 1/R_bar]: rho is saturated there (1/s >= R_bar)
    QuadResult head = integrate(integrand, 0.0, 1.0 / rbar);
    QuadResult tail = integrate_to_infinity(integrand, 1.0 / rbar, {}, 1e-16, 10000);
    rep.integral_finite = !tail.divergent && std::isfinite(tail.value);
    rep.integral_diag = head.value + tail.value;

    rep.moment_factor = mv_moment_factor(field, A, q);
    // unit c(d,q), surrogate polynomial s^{2q+2h(d)+d-1}; diagnostic only
    rep.bound_modulo_constant =
        rep.moment_factor / std::exp(log_gamma(q + 1.0)) * std::sqrt(1.0 + tail.value);
    return rep;
}

}  // namespace pgn
