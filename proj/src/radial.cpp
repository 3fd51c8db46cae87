#include "pgn/radial.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "pgn/errors.hpp"
#include "pgn/matching.hpp"
#include "pgn/sha256.hpp"
#include "pgn/special.hpp"

namespace pgn {

namespace {

double wrap_angle(double ang) {
    ang = std::fmod(ang, 2.0 * M_PI);
    return ang < 0.0 ? ang + 2.0 * M_PI : ang;
}

double angle_of(const Eigen::VectorXd& theta) {
    return wrap_angle(std::atan2(theta[1], theta[0]));
}

// integral of u^e over [lo, hi]
double power_integral(double lo, double hi, double e) {
    if (hi <= lo) return 0.0;
    if (std::fabs(e + 1.0) < 1e-12) return std::log(hi / lo);
    return (std::pow(hi, e + 1.0) - std::pow(lo, e + 1.0)) / (e + 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// AngularFn

double AngularFn::at_angle(double angle) const {
    switch (kind) {
        case Kind::Constant: return v1;
        case Kind::TwoPiece: return wrap_angle(angle) < M_PI ? v1 : v2;
        case Kind::Cosine: return v1 + v2 * std::cos(2.0 * harmonic * angle);
    }
    return v1;
}

double AngularFn::operator()(const Eigen::VectorXd& theta) const {
    if (kind == Kind::Constant) return v1;
    if (theta.size() != 2) throw DomainError("non-constant angular functions need d = 2");
    return at_angle(angle_of(theta));
}

nlohmann::json AngularFn::to_json() const {
    switch (kind) {
        case Kind::Constant: return {{"kind", "constant"}, {"value", v1}};
        case Kind::TwoPiece: return {{"kind", "two_piece"}, {"v1", v1}, {"v2", v2}};
        case Kind::Cosine: return {{"kind", "cosine"}, {"base", v1}, {"amp", v2}, {"k", harmonic}};
    }
    return {};
}

AngularFn AngularFn::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return constant(j.at("value").get<double>());
    if (kind == "two_piece") return two_piece(j.at("v1").get<double>(), j.at("v2").get<double>());
    if (kind == "cosine")
        return cosine(j.at("base").get<double>(), j.at("amp").get<double>(), j.value("k", 1));
    throw DomainError("unknown angular function kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// SphereMeasure

void SphereMeasure::validate() const {
    if (d < 2) throw DomainError("SphereMeasure: d >= 2 required");
    if (kind == Kind::Uniform) {
        if (!(mass > 0.0)) throw DomainError("SphereMeasure: mass > 0 required");
    } else if (kind == Kind::Atoms) {
        if (atom_theta.empty() || atom_theta.size() != atom_w.size())
            throw DomainError("SphereMeasure: atoms and weights must be nonempty and aligned");
        for (std::size_t i = 0; i < atom_theta.size(); ++i) {
            if (atom_theta[i].size() != d) throw DomainError("SphereMeasure: atom dimension mismatch");
            if (std::fabs(atom_theta[i].norm() - 1.0) > 1e-10)
                throw DomainError("SphereMeasure: atoms must be unit vectors");
            if (!(atom_w[i] > 0.0)) throw DomainError("SphereMeasure: atom weights must be positive");
        }
    } else {
        if (d != 2) throw DomainError("SphereMeasure: angular densities are d = 2 only");
        if (!(total_mass() > 0.0)) throw DomainError("SphereMeasure: angular density must have positive mass");
    }
}

double SphereMeasure::total_mass() const {
    switch (kind) {
        case Kind::Uniform: return mass;
        case Kind::Atoms: {
            double s = 0.0;
            for (double w : atom_w) s += w;
            return s;
        }
        case Kind::AngularDensity:
            switch (weight.kind) {
                case AngularFn::Kind::Constant: return 2.0 * M_PI * weight.v1;
                case AngularFn::Kind::TwoPiece: return M_PI * (weight.v1 + weight.v2);
                case AngularFn::Kind::Cosine: return 2.0 * M_PI * weight.v1;  // even harmonic integrates out
            }
    }
    return 0.0;
}

bool SphereMeasure::is_symmetric() const {
    switch (kind) {
        case Kind::Uniform: return true;
        case Kind::AngularDensity:
            return weight.kind != AngularFn::Kind::TwoPiece || weight.v1 == weight.v2;
        case Kind::Atoms: {
            for (std::size_t i = 0; i < atom_theta.size(); ++i) {
                bool found = false;
                for (std::size_t k = 0; k < atom_theta.size(); ++k) {
                    if ((atom_theta[i] + atom_theta[k]).norm() < 1e-10 &&
                        std::fabs(atom_w[i] - atom_w[k]) < 1e-12 * (atom_w[i] + atom_w[k])) {
                        found = true;
                        break;
                    }
                }
                if (!found) return false;
            }
            return true;
        }
    }
    return false;
}

void SphereMeasure::nodes(std::vector<Eigen::VectorXd>& theta, std::vector<double>& w,
                          int grid) const {
    theta.clear();
    w.clear();
    if (kind == Kind::Atoms) {
        theta = atom_theta;
        w = atom_w;
        return;
    }
    if (d == 2) {
        theta.reserve(grid);
        w.reserve(grid);
        const double h = 2.0 * M_PI / grid;
        for (int k = 0; k < grid; ++k) {
            const double ang = (k + 0.5) * h;
            Eigen::VectorXd t(2);
            t << std::cos(ang), std::sin(ang);
            theta.push_back(t);
            const double dens = kind == Kind::Uniform ? mass / (2.0 * M_PI) : weight.at_angle(ang);
            w.push_back(dens * h);
        }
        return;
    }
    if (d == 3) {
        // Fibonacci sphere, equal weights; adequate for ess-sup scans and
        // smooth integrands.
        const int n = std::max(grid, 1024);
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        theta.reserve(n);
        w.reserve(n);
        for (int k = 0; k < n; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / n;
            const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double ang = golden * k;
            Eigen::VectorXd t(3);
            t << rad * std::cos(ang), rad * std::sin(ang), z;
            theta.push_back(t);
            w.push_back(mass / n);
        }
        return;
    }
    throw DomainError("SphereMeasure: quadrature nodes need d <= 3 or atoms");
}

Eigen::VectorXd SphereMeasure::sample_direction(RngStream& rng) const {
    switch (kind) {
        case Kind::Uniform: {
            Eigen::VectorXd v(d);
            double norm2;
            do {
                for (int i = 0; i < d; ++i) v[i] = rng.normal();
                norm2 = v.squaredNorm();
            } while (norm2 == 0.0);
            return v / std::sqrt(norm2);
        }
        case Kind::Atoms: {
            double u = rng.uniform() * total_mass();
            for (std::size_t i = 0; i < atom_w.size(); ++i) {
                u -= atom_w[i];
                if (u <= 0.0) return atom_theta[i];
            }
            return atom_theta.back();
        }
        case Kind::AngularDensity: {
            const double wmax = weight.kind == AngularFn::Kind::Cosine
                                    ? weight.v1 + std::fabs(weight.v2)
                                    : std::max(weight.v1, weight.v2);
            double ang;
            do {
                ang = rng.uniform() * 2.0 * M_PI;
            } while (rng.uniform() * wmax > weight.at_angle(ang));
            Eigen::VectorXd t(2);
            t << std::cos(ang), std::sin(ang);
            return t;
        }
    }
    throw DomainError("SphereMeasure: unknown kind");
}

nlohmann::json SphereMeasure::to_json() const {
    switch (kind) {
        case Kind::Uniform: return {{"kind", "uniform"}, {"d", d}, {"mass", mass}};
        case Kind::Atoms: {
            nlohmann::json atoms = nlohmann::json::array();
            for (std::size_t i = 0; i < atom_theta.size(); ++i) {
                std::vector<double> t(atom_theta[i].data(), atom_theta[i].data() + atom_theta[i].size());
                atoms.push_back({{"theta", t}, {"w", atom_w[i]}});
            }
            return {{"kind", "atoms"}, {"d", d}, {"atoms", atoms}};
        }
        case Kind::AngularDensity:
            return {{"kind", "angular_density"}, {"d", d}, {"weight", weight.to_json()}};
    }
    return {};
}

SphereMeasure SphereMeasure::from_json(const nlohmann::json& j) {
    SphereMeasure nu;
    const std::string kind = j.at("kind").get<std::string>();
    nu.d = j.at("d").get<int>();
    if (kind == "uniform") {
        nu.kind = Kind::Uniform;
        nu.mass = j.at("mass").get<double>();
    } else if (kind == "atoms") {
        nu.kind = Kind::Atoms;
        for (const auto& a : j.at("atoms")) {
            auto t = a.at("theta").get<std::vector<double>>();
            nu.atom_theta.push_back(
                Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())));
            nu.atom_w.push_back(a.at("w").get<double>());
        }
    } else if (kind == "angular_density") {
        nu.kind = Kind::AngularDensity;
        nu.weight = AngularFn::from_json(j.at("weight"));
    } else {
        throw DomainError("unknown sphere measure kind '" + kind + "'");
    }
    nu.validate();
    return nu;
}

// ---------------------------------------------------------------------------
// RadialLevySpec

void RadialLevySpec::validate() const {
    nu.validate();
    if (!(r0 > 0.0)) throw DomainError("RadialLevySpec: r0 > 0 required");
    if (nu.d > 2 && !(a_fn.kind == AngularFn::Kind::Constant && c_fn.kind == AngularFn::Kind::Constant))
        throw DomainError("RadialLevySpec: d >= 3 supports constant a and c only");
    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    nu.nodes(th, w, 512);
    for (const auto& t : th) {
        const double av = a_fn(t);
        if (!(av > 0.0 && av < 2.0)) throw DomainError("RadialLevySpec: a(theta) must stay in (0, 2)");
        if (!(c_fn(t) > 0.0)) throw DomainError("RadialLevySpec: c(theta) must stay positive");
    }
    if (symmetric) {
        if (!nu.is_symmetric()) throw DomainError("RadialLevySpec: symmetric flag needs antipodal nu");
        if (!a_fn.is_even() || !c_fn.is_even())
            throw DomainError("RadialLevySpec: symmetric flag needs even a and c");
    }
    if (direction_independent && !(a_fn.is_constant() && c_fn.is_constant()))
        throw DomainError("RadialLevySpec: direction_independent flag needs constant a and c");
}

double RadialLevySpec::radial_partial_cumulant(const Eigen::VectorXd& theta, double j,
                                               double r) const {
    const double av = a(theta);
    const double reff = std::min(r, r0);
    return c(theta) * std::pow(reff, j - av) / (j - av);
}

bool RadialLevySpec::piecewise_direction_independent() const {
    return a_fn.is_piecewise_constant() && c_fn.is_piecewise_constant();
}

nlohmann::json RadialLevySpec::to_json() const {
    return {{"nu", nu.to_json()},
            {"a", a_fn.to_json()},
            {"c", c_fn.to_json()},
            {"r0", r0},
            {"symmetric", symmetric},
            {"direction_independent", direction_independent}};
}

RadialLevySpec RadialLevySpec::from_json(const nlohmann::json& j) {
    RadialLevySpec spec;
    spec.nu = SphereMeasure::from_json(j.at("nu"));
    spec.a_fn = AngularFn::from_json(j.at("a"));
    spec.c_fn = AngularFn::from_json(j.at("c"));
    spec.r0 = j.at("r0").get<double>();
    spec.symmetric = j.value("symmetric", false);
    spec.direction_independent = j.value("direction_independent", false);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Fit constants

double pi_of_a(double a) { return stable_p_sym(a); }

JFuncs j_functions(double a) {
    if (!(a > 0.0 && a < 2.0)) throw DomainError("j_functions: a must lie in (0, 2)");
    JFuncs f{};
    f.pi = pi_of_a(a);
    f.j0 = 1.0 / (2.0 - a);
    f.j1 = std::sqrt((4.0 - a) / ((f.pi + 5.0) * (f.pi + 6.0) * (6.0 - a)));
    // Per-ray normalization: each direction's Gamma density reproduces the
    // conditional cumulants at orders 4, 6 and 8 on its own ray, and after
    // calibration leaves a gap of exactly tau^2 at order 2.
    f.log_j2 = -(log_gamma(f.pi + 5.0) + std::log(4.0 - a) + (f.pi + 5.0) * std::log(f.j1));
    f.j2 = std::exp(f.log_j2);
    f.j3 = 1.0 / ((f.pi + 3.0) * (f.pi + 4.0) * (4.0 - a) * f.j1 * f.j1);
    if (!(f.j3 < f.j0))
        throw RootBracketError("j_functions: Gamma second moment exceeds the conditional one");
    f.j4 = std::pow(f.j0 - f.j3, -1.0 / (2.0 - a));
    f.jn = 1.0 / ((f.pi + 1.0) * (f.pi + 2.0) * (f.pi + 3.0) * (f.pi + 4.0) * (4.0 - a) *
                  f.j1 * f.j1 * f.j1 * f.j1);
    return f;
}

// ---------------------------------------------------------------------------
// K_nu and matrix square root

Eigen::MatrixXd K_nu(const RadialLevySpec& spec) {
    const int d = spec.dim();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d, d);
    const auto& nu = spec.nu;
    if (nu.kind == SphereMeasure::Kind::Uniform) {
        K = (nu.mass / d) * Eigen::MatrixXd::Identity(d, d);
    } else {
        std::vector<Eigen::VectorXd> th;
        std::vector<double> w;
        nu.nodes(th, w);
        for (std::size_t i = 0; i < th.size(); ++i) K += w[i] * th[i] * th[i].transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    if (es.eigenvalues().minCoeff() < 1e-12 * K.trace())
        throw RankDeficient("K_nu: direction measure does not span the space");
    return K;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.eigenvalues().minCoeff() < 1e-12 * M.trace())
        throw RankDeficient("sym_sqrt: matrix is numerically singular");
    return es.operatorSqrt();
}

// ---------------------------------------------------------------------------
// RadialField

namespace {

// Everything the event loop needs for one direction.
struct DirParams {
    double a, c, p, r, s, log_m, B, N, inv_ra, inv_r0a;
};

DirParams dir_params(const RadialLevySpec& spec, double tau, double a, double c) {
    const JFuncs f = j_functions(a);
    DirParams dp{};
    dp.a = a;
    dp.c = c;
    dp.p = f.pi;
    dp.r = f.j4 * std::pow(tau * tau / c, 1.0 / (2.0 - a));
    dp.s = f.j1 * dp.r;
    dp.log_m = std::log(c) + f.log_j2 + (-1.0 - a - f.pi) * std::log(dp.r);
    dp.inv_ra = std::pow(dp.r, -a);
    dp.inv_r0a = std::pow(spec.r0, -a);
    dp.B = c * power_integral(dp.r, spec.r0, -a - 1.0);
    dp.N = c * f.jn * dp.inv_ra;
    return dp;
}

}  // namespace

// Small read-only cache of per-piece parameters, built once per field use.
struct FieldEvaluator {
    const RadialField& field;
    std::vector<DirParams> cache;

    explicit FieldEvaluator(const RadialField& f) : field(f) {
        // Piecewise-constant specs touch at most four (a, c) combinations.
        if (f.spec.a_fn.is_piecewise_constant() && f.spec.c_fn.is_piecewise_constant()) {
            for (double a : {f.spec.a_fn.v1, f.spec.a_fn.kind == AngularFn::Kind::TwoPiece
                                                 ? f.spec.a_fn.v2
                                                 : f.spec.a_fn.v1}) {
                for (double c : {f.spec.c_fn.v1, f.spec.c_fn.kind == AngularFn::Kind::TwoPiece
                                                     ? f.spec.c_fn.v2
                                                     : f.spec.c_fn.v1}) {
                    bool seen = false;
                    for (const auto& dp : cache)
                        if (dp.a == a && dp.c == c) seen = true;
                    if (!seen) cache.push_back(dir_params(f.spec, f.tau, a, c));
                }
            }
        }
    }

    DirParams operator()(const Eigen::VectorXd& th) const {
        const double a = field.spec.a(th);
        const double c = field.spec.c(th);
        for (const auto& dp : cache)
            if (dp.a == a && dp.c == c) return dp;
        return dir_params(field.spec, field.tau, a, c);
    }
};

double RadialField::r_tau(const Eigen::VectorXd& th) const {
    return dir_params(spec, tau, a(th), c(th)).r;
}

double RadialField::p_tau(const Eigen::VectorXd& th) const { return pi_of_a(a(th)); }

double RadialField::s_tau(const Eigen::VectorXd& th) const {
    return dir_params(spec, tau, a(th), c(th)).s;
}

double RadialField::log_m_tau(const Eigen::VectorXd& th) const {
    return dir_params(spec, tau, a(th), c(th)).log_m;
}

double RadialField::m_tau(const Eigen::VectorXd& th) const { return std::exp(log_m_tau(th)); }

double RadialField::B_tau(const Eigen::VectorXd& th) const {
    return dir_params(spec, tau, a(th), c(th)).B;
}

double RadialField::N_tau(const Eigen::VectorXd& th) const {
    return dir_params(spec, tau, a(th), c(th)).N;
}

nlohmann::json RadialField::to_json() const {
    std::vector<std::vector<double>> k(K.rows());
    for (int i = 0; i < K.rows(); ++i) k[i].assign(K.row(i).data(), K.row(i).data() + K.cols());
    return {{"tau", tau}, {"spec", spec.to_json()}, {"K", k},
            {"essup_B", essup_B}, {"essup_N", essup_N}};
}

RadialField RadialField::from_json(const nlohmann::json& j) {
    RadialLevySpec spec = RadialLevySpec::from_json(j.at("spec"));
    return radial_match(spec, j.at("tau").get<double>());
}

namespace {

Eigen::VectorXd angular_first_moment(const RadialLevySpec& spec,
                                     const std::function<double(const Eigen::VectorXd&)>& f) {
    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    spec.nu.nodes(th, w);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(spec.dim());
    for (std::size_t i = 0; i < th.size(); ++i) mu += w[i] * f(th[i]) * th[i];
    return mu;
}

// Fix the centering constants once per field. They exist in closed form
// for symmetric and (piecewise) direction-independent specs; anything else
// is marked unavailable and sampling refuses later.
void compute_centerings(RadialField& field) {
    const auto& spec = field.spec;
    if (spec.symmetric) {
        field.mu_delta = Eigen::VectorXd::Zero(spec.dim());
        field.mu_y = Eigen::VectorXd::Zero(spec.dim());
        field.centering_available = true;
        return;
    }
    if (spec.direction_independent || spec.piecewise_direction_independent()) {
        field.mu_delta = angular_first_moment(spec, [&](const Eigen::VectorXd& t) {
            return spec.c(t) * power_integral(field.r_tau(t), spec.r0, -spec.a(t));
        });
        field.mu_y = angular_first_moment(spec, [&](const Eigen::VectorXd& t) {
            return (field.p_tau(t) + 1.0) * field.s_tau(t) * field.N_tau(t);
        });
        field.centering_available = true;
        return;
    }
    field.centering_available = false;
}

}  // namespace

RadialField radial_match(const RadialLevySpec& spec, double tau) {
    spec.validate();
    if (!(tau > 0.0)) throw DomainError("radial_match: tau > 0 required");
    RadialField field;
    field.tau = tau;
    field.spec = spec;

    std::vector<Eigen::VectorXd> th;
    std::vector<double> w;
    spec.nu.nodes(th, w);
    double max_r = 0.0, max_B = 0.0, max_N = 0.0;
    for (const auto& t : th) max_r = std::max(max_r, field.r_tau(t));
    if (!(max_r < spec.r0))
        throw TauTooLarge("radial_match: r_tau(theta) reaches the support radius; lower tau");
    for (const auto& t : th) {
        max_B = std::max(max_B, field.B_tau(t));
        max_N = std::max(max_N, field.N_tau(t));
    }
    field.essup_B = 1.05 * max_B;
    field.essup_N = 1.05 * max_N;
    field.K = K_nu(spec);
    field.sqrtK = sym_sqrt(field.K);
    compute_centerings(field);
    return field;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct MvDrawContext {
    const RadialField& field;
    FieldEvaluator eval;
    Eigen::VectorXd mu_delta;
    Eigen::VectorXd mu_y;

    explicit MvDrawContext(const RadialField& f, bool need_delta) : field(f), eval(f) {
        (void)need_delta;
        if (!f.centering_available)
            throw CenteringUnavailable(
                "centering has no closed form: spec is neither symmetric nor piecewise "
                "direction independent");
        mu_delta = f.mu_delta;
        mu_y = f.mu_y;
    }

    void observe(ThinningStats* stats, double accept, bool ok) const {
        if (!stats) return;
        ++stats->proposed;
        if (ok) ++stats->accepted;
        stats->max_acceptance = std::max(stats->max_acceptance, accept);
        if (accept > 1.0) ++stats->clamped;
    }

    Eigen::VectorXd draw_delta(RngStream& rng, ThinningStats* stats) const {
        const auto& spec = field.spec;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(spec.dim());
        const long long n = rng.poisson(field.essup_B * spec.nu.total_mass());
        for (long long i = 0; i < n; ++i) {
            const Eigen::VectorXd th = spec.nu.sample_direction(rng);
            const DirParams dp = eval(th);
            const double accept = dp.B / field.essup_B;
            const bool ok = rng.uniform() < accept;
            observe(stats, accept, ok);
            if (!ok) continue;
            const double zeta =
                std::pow(dp.inv_ra - rng.uniform() * (dp.inv_ra - dp.inv_r0a), -1.0 / dp.a);
            sum += zeta * th;
        }
        return sum - mu_delta;
    }

    Eigen::VectorXd draw_y(RngStream& rng, ThinningStats* stats) const {
        const auto& spec = field.spec;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(spec.dim());
        const long long n = rng.poisson(field.essup_N * spec.nu.total_mass());
        for (long long i = 0; i < n; ++i) {
            const Eigen::VectorXd th = spec.nu.sample_direction(rng);
            const DirParams dp = eval(th);
            const double accept = dp.N / field.essup_N;
            const bool ok = rng.uniform() < accept;
            observe(stats, accept, ok);
            if (!ok) continue;
            sum += rng.gamma(dp.p + 1.0, dp.s) * th;
        }
        return sum - mu_y;
    }

    Eigen::VectorXd draw_T(RngStream& rng, ThinningStats* stats) const {
        const int d = field.spec.dim();
        Eigen::VectorXd y = draw_y(rng, stats);
        Eigen::VectorXd z(d);
        for (int i = 0; i < d; ++i) z[i] = rng.normal();
        return y + field.tau * (field.sqrtK * z);
    }
};

}  // namespace

Eigen::VectorXd sample_delta_tau(const RadialField& field, RngStream& rng, ThinningStats* stats) {
    return MvDrawContext(field, true).draw_delta(rng, stats);
}

Eigen::VectorXd sample_Y_tau(const RadialField& field, RngStream& rng, ThinningStats* stats) {
    return MvDrawContext(field, false).draw_y(rng, stats);
}

Eigen::VectorXd sample_T_tau(const RadialField& field, RngStream& rng, ThinningStats* stats) {
    return MvDrawContext(field, false).draw_T(rng, stats);
}

SigmaTau sigma_tau(const RadialField& field) {
    const auto& spec = field.spec;
    const int d = spec.dim();
    SigmaTau out;
    out.Sigma = Eigen::MatrixXd::Zero(d, d);
    if (spec.nu.kind == SphereMeasure::Kind::Uniform && spec.a_fn.is_constant() &&
        spec.c_fn.is_constant()) {
        Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d, 0);
        const double av = spec.a(e1);
        const double scalar = spec.c(e1) / (2.0 - av) * std::pow(field.r_tau(e1), 2.0 - av);
        out.Sigma = scalar * (spec.nu.mass / d) * Eigen::MatrixXd::Identity(d, d);
    } else {
        std::vector<Eigen::VectorXd> th;
        std::vector<double> w;
        spec.nu.nodes(th, w);
        for (std::size_t i = 0; i < th.size(); ++i) {
            const double av = spec.a(th[i]);
            const double scalar =
                spec.c(th[i]) / (2.0 - av) * std::pow(field.r_tau(th[i]), 2.0 - av);
            out.Sigma += w[i] * scalar * th[i] * th[i].transpose();
        }
    }
    out.A = sym_sqrt(out.Sigma);
    return out;
}

SampleBatch sample_mv_batch(const RadialField& field, std::size_t n, const BatchOptions& opt,
                            MvPart part, ThinningStats* stats) {
    const int d = field.spec.dim();
    SampleBatch batch;
    batch.n = n;
    batch.dim = d;
    batch.master_seed = opt.master_seed;
    batch.stream_base = opt.stream_base;
    {
        nlohmann::json spec = {{"kind", part == MvPart::TTau ? "mv_T" : "mv_pgn"},
                               {"field", field.to_json()}};
        batch.spec_hash = sha256_hex(spec.dump());
    }
    batch.values.resize(n * d);
    if (n == 0) return batch;

    const MvDrawContext ctx(field, part == MvPart::DeltaPlusTTau);

    const std::size_t chunk = opt.chunk == 0 ? 65536 : opt.chunk;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<ThinningStats> chunk_stats(n_chunks);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n_chunks) return;
            RngStream rng(opt.master_seed, opt.stream_base + k);
            ThinningStats* st = &chunk_stats[k];
            const std::size_t lo = k * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            for (std::size_t i = lo; i < hi; ++i) {
                Eigen::VectorXd v = ctx.draw_T(rng, st);
                if (part == MvPart::DeltaPlusTTau) v += ctx.draw_delta(rng, st);
                for (int c = 0; c < d; ++c) batch.values[i * d + c] = v[c];
            }
        }
    };
    const int threads = std::max(1, opt.threads);
    if (threads == 1 || n_chunks <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    ThinningStats total;
    for (const auto& st : chunk_stats) {
        total.proposed += st.proposed;
        total.accepted += st.accepted;
        total.max_acceptance = std::max(total.max_acceptance, st.max_acceptance);
        total.clamped += st.clamped;
    }
    if (stats) *stats = total;
    if (total.clamped > 0)
        throw RootBracketError("thinning acceptance exceeded 1; ess sup safety margin violated");
    return batch;
}

}  // namespace pgn
