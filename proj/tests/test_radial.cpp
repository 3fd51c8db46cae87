#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pgn/bounds.hpp"
#include "pgn/errors.hpp"
#include "pgn/radial.hpp"
#include "pgn/validation.hpp"

using namespace pgn;

namespace {

RadialLevySpec uniform_spec(double a, bool symmetric = true, double mass = 1.0) {
    RadialLevySpec spec;
    spec.nu.kind = SphereMeasure::Kind::Uniform;
    spec.nu.d = 2;
    spec.nu.mass = mass;
    spec.a_fn = AngularFn::constant(a);
    spec.c_fn = AngularFn::constant(1.0);
    spec.r0 = 1.0;
    spec.symmetric = symmetric;
    spec.direction_independent = true;
    return spec;
}

Eigen::VectorXd dir(double ang) {
    Eigen::VectorXd t(2);
    t << std::cos(ang), std::sin(ang);
    return t;
}

}  // namespace

TEST_CASE("pi_of_a equals the quadratic oracle and decreases") {
    const double p1 = pi_of_a(1.0);
    const double oracle_p = oracle::bisect(
        [](double p) { return (p + 7) * (p + 8) / ((p + 5) * (p + 6)) - 25.0 / 21.0; }, 0.0, 100.0);
    CHECK(p1 == doctest::Approx(oracle_p).epsilon(1e-12));
    CHECK(p1 == doctest::Approx(16.4673449411797).epsilon(1e-10));
    double prev = 1e9;
    for (double a = 0.02; a < 2.0; a += 0.02) {
        const double p = pi_of_a(a);
        CHECK(p < prev);
        prev = p;
        const double g = (p + 7) * (p + 8) / ((p + 5) * (p + 6));
        const double h = (6 - a) * (6 - a) / ((4 - a) * (8 - a));
        CHECK(std::fabs(g - h) < 1e-12);
    }
}

TEST_CASE("fit constants") {
    for (double a = 0.02; a < 2.0; a += 0.02) {
        auto f = j_functions(a);
        CHECK(f.j0 == doctest::Approx(1.0 / (2.0 - a)).epsilon(1e-14));
        CHECK(f.j1 ==
              doctest::Approx(std::sqrt((4 - a) / ((f.pi + 5) * (f.pi + 6) * (6 - a)))).epsilon(1e-13));
        CHECK(f.j3 > 0.0);
        CHECK(f.j3 < f.j0);  // the Gamma part never exhausts the conditional variance
        // calibration identity behind j4
        CHECK((f.j0 - f.j3) * std::pow(f.j4, 2.0 - a) == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto f1 = j_functions(1.0);
    CHECK(f1.j0 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f1.j1 == doctest::Approx(0.035265).epsilon(2e-4));
}

TEST_CASE("per-direction ninth-order match on every ray") {
    // for a grid of angles, the Gamma density must reproduce the truncated
    // conditional's cumulants at orders 4..8 and leave exactly tau^2 at 2;
    // the Gamma side is integrated numerically as the independent route
    RadialLevySpec spec = uniform_spec(1.0);
    spec.a_fn = AngularFn::cosine(1.0, 0.4, 1);  // a(theta) in [0.6, 1.4]
    spec.direction_independent = false;
    const double tau = 0.1;
    auto field = radial_match(spec, tau);
    for (int k = 0; k < 16; ++k) {
        const auto th = dir(2.0 * M_PI * (k + 0.5) / 16.0);
        const double p = field.p_tau(th), s = field.s_tau(th), m = field.m_tau(th);
        for (double j : {2.0, 4.0, 6.0, 8.0}) {
            const double lam = spec.radial_partial_cumulant(th, j, field.r_tau(th));
            const double gam = oracle::simpson(
                [&](double u) { return m * std::pow(u, j + p) * std::exp(-u / s); },
                0.0, 220.0 * s, 4096, 1e-12);
            const double target = gam + (j == 2.0 ? tau * tau : 0.0);
            CAPTURE(k);
            CAPTURE(j);
            CHECK(std::fabs(lam - target) / lam < 1e-8);
        }
    }
}

TEST_CASE("radial match: constants, scaling, validity") {
    auto spec = uniform_spec(1.0);
    auto field = radial_match(spec, 0.2);
    // direction independence: the fitted functions are constant in angle
    const double r0v = field.r_tau(dir(0.1));
    for (double ang = 0.0; ang < 6.28; ang += 0.39) {
        CHECK(field.r_tau(dir(ang)) == doctest::Approx(r0v).epsilon(1e-14));
        CHECK(field.s_tau(dir(ang)) == doctest::Approx(field.s_tau(dir(0.1))).epsilon(1e-14));
        CHECK(field.p_tau(dir(ang)) == doctest::Approx(pi_of_a(1.0)).epsilon(1e-14));
    }
    // halving tau scales r_tau by 2^{-2/(2-a)}
    auto half = radial_match(spec, 0.1);
    CHECK(half.r_tau(dir(0.3)) ==
          doctest::Approx(r0v * std::pow(2.0, -2.0 / (2.0 - 1.0))).epsilon(1e-13));
    // a tau that pushes r_tau past r0 is rejected
    CHECK_THROWS_AS(radial_match(spec, 0.95), TauTooLarge);
    // a(theta) leaving (0,2) is rejected at validation
    RadialLevySpec bad = spec;
    bad.a_fn = AngularFn::cosine(1.0, 1.2, 1);
    bad.direction_independent = false;
    bad.symmetric = false;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("direction second-moment matrix") {
    CHECK(K_nu(uniform_spec(1.0)).isApprox(0.5 * Eigen::MatrixXd::Identity(2, 2), 1e-14));

    RadialLevySpec atoms;
    atoms.nu.kind = SphereMeasure::Kind::Atoms;
    atoms.nu.d = 2;
    atoms.nu.atom_theta = {dir(0.0), dir(M_PI_2)};
    atoms.nu.atom_w = {1.0, 1.0};
    atoms.a_fn = AngularFn::constant(1.0);
    atoms.c_fn = AngularFn::constant(1.0);
    atoms.r0 = 1.0;
    CHECK(K_nu(atoms).isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-14));

    RadialLevySpec flat = atoms;
    flat.nu.atom_theta = {dir(0.0), dir(M_PI)};
    CHECK_THROWS_AS(K_nu(flat), RankDeficient);
}

TEST_CASE("Delta_tau sampling: mean, covariance, thinning") {
    auto spec = uniform_spec(1.0);
    auto field = radial_match(spec, 0.25);
    RngStream rng(31, 0);
    ThinningStats stats;
    const int n = 300000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    std::vector<double> x0(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = sample_delta_tau(field, rng, &stats);
        mean += v;
        cov += v * v.transpose();
        x0[i] = v[0];
    }
    mean /= n;
    cov /= n;
    CHECK(stats.max_acceptance <= 1.0);
    CHECK(stats.clamped == 0);
    CHECK(stats.accepted < stats.proposed);

    // symmetric: centering is exactly zero
    auto se = oracle::batch_mean_se(x0);
    CHECK(std::fabs(mean[0]) < 5.0 * se.se);

    // covariance oracle: integral of theta theta' u^2 over the tail
    const double rt = field.r_tau(dir(0.0));
    const double tail_second = oracle::simpson(
        [&](double u) { return 1.0; }, rt, 1.0);  // integral of u^2 u^{-2} du
    const Eigen::Matrix2d expect = 0.5 * tail_second * Eigen::Matrix2d::Identity();
    const double se_scale = 5.0 * std::sqrt((double)cov(0, 0) * cov(0, 0) * 3.0 / n);
    CHECK(std::fabs(cov(0, 0) - expect(0, 0)) < se_scale);
    CHECK(std::fabs(cov(1, 1) - expect(1, 1)) < se_scale);
    CHECK(std::fabs(cov(0, 1) - 0.0) < se_scale);
}

TEST_CASE("Y_tau sampling: covariance against the Gamma second moment") {
    auto spec = uniform_spec(1.0);
    auto field = radial_match(spec, 0.25);
    RngStream rng(32, 0);
    const int n = 300000;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = sample_Y_tau(field, rng);
        mean += v;
        cov += v * v.transpose();
    }
    mean /= n;
    cov /= n;
    const auto th = dir(0.0);
    const double gamma_second = std::exp(gamma_levy_cumulant_log(
        field.p_tau(th), std::log(field.s_tau(th)), field.log_m_tau(th), 2.0));
    const Eigen::Matrix2d expect = 0.5 * gamma_second * Eigen::Matrix2d::Identity();
    const double se_scale = 5.0 * std::sqrt(cov(0, 0) * cov(0, 0) * 3.0 / n);
    CHECK(std::fabs(mean[0]) < 5.0 * std::sqrt(cov(0, 0) / n));
    CHECK(std::fabs(cov(0, 0) - expect(0, 0)) < se_scale);
    CHECK(std::fabs(cov(0, 1)) < se_scale);
}

TEST_CASE("asymmetric direction-independent centering") {
    // lopsided atoms, constant conditional: the closed-form centering must
    // leave a zero mean
    RadialLevySpec spec;
    spec.nu.kind = SphereMeasure::Kind::Atoms;
    spec.nu.d = 2;
    spec.nu.atom_theta = {dir(0.0), dir(M_PI_2), dir(M_PI)};
    spec.nu.atom_w = {1.0, 0.7, 0.4};
    spec.a_fn = AngularFn::constant(0.8);
    spec.c_fn = AngularFn::constant(1.0);
    spec.r0 = 1.0;
    spec.symmetric = false;
    spec.direction_independent = true;
    auto field = radial_match(spec, 0.2);
    RngStream rng(33, 0);
    const int n = 400000;
    Eigen::Vector2d mean_d = Eigen::Vector2d::Zero(), mean_y = Eigen::Vector2d::Zero();
    double var0 = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = sample_delta_tau(field, rng);
        Eigen::VectorXd y = sample_Y_tau(field, rng);
        mean_d += v;
        mean_y += y;
        var0 += v[0] * v[0] + y[0] * y[0];
    }
    mean_d /= n;
    mean_y /= n;
    const double se = 5.0 * std::sqrt(var0 / n / n);
    CHECK(std::fabs(mean_d[0]) < se);
    CHECK(std::fabs(mean_d[1]) < se);
    CHECK(std::fabs(mean_y[0]) < se);
    CHECK(std::fabs(mean_y[1]) < se);
}

TEST_CASE("piecewise direction-independent centering and refusal otherwise") {
    RadialLevySpec spec;
    spec.nu.kind = SphereMeasure::Kind::Uniform;
    spec.nu.d = 2;
    spec.nu.mass = 1.0;
    spec.a_fn = AngularFn::two_piece(0.7, 1.1);
    spec.c_fn = AngularFn::constant(1.0);
    spec.r0 = 1.0;
    spec.symmetric = false;
    spec.direction_independent = false;
    auto field = radial_match(spec, 0.15);
    RngStream rng(34, 0);
    const int n = 300000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    double var0 = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = sample_delta_tau(field, rng);
        mean += v;
        var0 += v.squaredNorm();
    }
    mean /= n;
    CHECK(std::fabs(mean[0]) < 5.0 * std::sqrt(var0 / n / n));
    CHECK(std::fabs(mean[1]) < 5.0 * std::sqrt(var0 / n / n));

    // smooth asymmetric conditional: no closed-form centering, refuse
    RadialLevySpec smooth = spec;
    smooth.a_fn = AngularFn::cosine(1.0, 0.3, 1);
    smooth.c_fn = AngularFn::cosine(1.0, 0.2, 1);
    auto f2 = radial_match(smooth, 0.15);
    CHECK_THROWS_AS(sample_delta_tau(f2, rng), CenteringUnavailable);
    CHECK_THROWS_AS(sample_Y_tau(f2, rng), CenteringUnavailable);
}

TEST_CASE("T_tau covariance equals Sigma_tau") {
    auto spec = uniform_spec(1.0);
    auto field = radial_match(spec, 0.2);
    auto st = sigma_tau(field);
    // closed form for the uniform direction-independent case
    const double rt = field.r_tau(dir(0.0));
    CHECK(st.Sigma(0, 0) == doctest::Approx(0.5 * rt).epsilon(1e-12));
    CHECK((st.A * st.A).isApprox(st.Sigma, 1e-12));
    // Gaussian floor: Sigma - tau^2 K is positive semidefinite
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(st.Sigma - 0.04 * field.K);
    CHECK(es.eigenvalues().minCoeff() > -1e-14);

    BatchOptions bo;
    bo.master_seed = 35;
    auto rep = mv_cov_check(field, 300000, bo);
    CHECK(rep.max_abs_z_mean < 5.0);
    CHECK(rep.max_abs_z_cov < 5.0);
}

TEST_CASE("mixed cumulants of T_tau at orders 2 and 4") {
    auto spec = uniform_spec(1.0);
    const double tau = 0.25;
    auto field = radial_match(spec, tau);
    BatchOptions bo;
    bo.master_seed = 36;
    const std::size_t n = 400000;
    auto batch = sample_mv_batch(field, n, bo, MvPart::TTau);

    // targets: kappa_alpha = integral theta^alpha u^{|alpha|} gamma_tau + Gaussian
    const auto th = dir(0.0);
    const double u4 = std::exp(gamma_levy_cumulant_log(
        field.p_tau(th), std::log(field.s_tau(th)), field.log_m_tau(th), 4.0));
    // angular moments of the uniform probability measure on the circle
    const double m40 = 3.0 / 8.0, m22 = 1.0 / 8.0;  // average of cos^4, cos^2 sin^2
    const double target40 = u4 * m40;
    const double target22 = u4 * m22;

    // empirical mixed cumulants with batch-means errors
    const int B = 100;
    const std::size_t len = n / B;
    std::vector<double> k40(B), k22(B);
    for (int b = 0; b < B; ++b) {
        double sxx = 0, syy = 0, sxy = 0, sx4 = 0, sx2y2 = 0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) {
            const double x = batch.values[2 * i], y = batch.values[2 * i + 1];
            sxx += x * x; syy += y * y; sxy += x * y;
            sx4 += x * x * x * x;
            sx2y2 += x * x * y * y;
        }
        sxx /= len; syy /= len; sxy /= len; sx4 /= len; sx2y2 /= len;
        k40[b] = sx4 - 3.0 * sxx * sxx;
        k22[b] = sx2y2 - sxx * syy - 2.0 * sxy * sxy;
    }
    auto m1 = oracle::batch_mean_se(k40);
    auto m2 = oracle::batch_mean_se(k22);
    CHECK(std::fabs(m1.mean - target40) < 5.0 * m1.se);
    CHECK(std::fabs(m2.mean - target22) < 5.0 * m2.se);
}

TEST_CASE("reweighting the polar factorization leaves the law unchanged") {
    // (lambda, nu) -> (w lambda, nu / w) with a two-piece weight
    const double tau = 0.2;
    auto base_field = radial_match(uniform_spec(1.0), tau);

    RadialLevySpec rw;
    rw.nu.kind = SphereMeasure::Kind::AngularDensity;
    rw.nu.d = 2;
    rw.nu.weight = AngularFn::two_piece(1.0 / (2.0 * M_PI) / 2.0, 1.0 / (2.0 * M_PI) / 0.5);
    rw.a_fn = AngularFn::constant(1.0);
    rw.c_fn = AngularFn::two_piece(2.0, 0.5);
    rw.r0 = 1.0;
    rw.symmetric = false;  // the reweighted pieces are asymmetric individually
    rw.direction_independent = false;
    auto rw_field = radial_match(rw, tau);

    BatchOptions b1, b2;
    b1.master_seed = 37;
    b2.master_seed = 38;
    const std::size_t n = 400000;
    auto s1 = sample_mv_batch(base_field, n, b1);
    auto s2 = sample_mv_batch(rw_field, n, b2);
    for (int c = 0; c < 2; ++c) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = s1.values[2 * i + c];
            b[i] = s2.values[2 * i + c];
        }
        const double ks = ks_two_sample(a, b);
        CAPTURE(c);
        CHECK(ks < 1.95 * std::sqrt(2.0 / (double)n));
    }
}

TEST_CASE("mv batch determinism and export") {
    auto field = radial_match(uniform_spec(0.8), 0.2);
    BatchOptions b1, b8;
    b1.master_seed = b8.master_seed = 40;
    b1.threads = 1;
    b8.threads = 8;
    auto s1 = sample_mv_batch(field, 200000, b1);
    auto s8 = sample_mv_batch(field, 200000, b8);
    CHECK(s1.values == s8.values);
    CHECK(s1.dim == 2);
}

TEST_CASE("spec and field JSON round trips") {
    auto spec = uniform_spec(1.2);
    auto j = spec.to_json();
    auto back = RadialLevySpec::from_json(j);
    CHECK(back.r0 == spec.r0);
    CHECK(back.symmetric == spec.symmetric);
    CHECK(back.a(dir(0.3)) == doctest::Approx(1.2));

    auto field = radial_match(spec, 0.1);
    auto fj = field.to_json();
    auto fback = RadialField::from_json(fj);
    CHECK(fback.tau == field.tau);
    CHECK(fback.r_tau(dir(1.0)) == doctest::Approx(field.r_tau(dir(1.0))).epsilon(1e-14));
    CHECK(fback.essup_B == doctest::Approx(field.essup_B).epsilon(1e-12));
}
