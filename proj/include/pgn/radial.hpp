#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pgn/rng.hpp"
#include "pgn/sampler.hpp"

namespace pgn {

/// Direction-dependent scalar from a small named catalog. Two-piece and
/// cosine kinds are defined for d = 2 (angle measured from the x axis);
/// d >= 3 uses constants only.
struct AngularFn {
    enum class Kind { Constant, TwoPiece, Cosine };
    Kind kind = Kind::Constant;
    double v1 = 0.0;     ///< constant value / first piece / cosine base
    double v2 = 0.0;     ///< second piece / cosine amplitude
    int harmonic = 1;    ///< cosine: value = v1 + v2 cos(2 k angle)

    double operator()(const Eigen::VectorXd& theta) const;
    double at_angle(double angle) const;  // d = 2
    bool is_constant() const { return kind == Kind::Constant || (kind == Kind::TwoPiece && v1 == v2) || (kind == Kind::Cosine && v2 == 0.0); }
    bool is_piecewise_constant() const { return kind != Kind::Cosine || v2 == 0.0; }
    /// Invariant under the antipodal map theta -> -theta.
    bool is_even() const { return is_constant() || kind == Kind::Cosine; }

    static AngularFn constant(double v) { return {Kind::Constant, v, 0.0, 1}; }
    static AngularFn two_piece(double v1, double v2) { return {Kind::TwoPiece, v1, v2, 1}; }
    static AngularFn cosine(double base, double amp, int k = 1) { return {Kind::Cosine, base, amp, k}; }

    nlohmann::json to_json() const;
    static AngularFn from_json(const nlohmann::json& j);
};

/// Finite measure nu on the unit sphere. Atoms are exact; uniform and
/// d = 2 angular densities integrate over node grids.
struct SphereMeasure {
    enum class Kind { Uniform, Atoms, AngularDensity };
    Kind kind = Kind::Uniform;
    int d = 2;
    double mass = 1.0;                      ///< uniform total mass
    std::vector<Eigen::VectorXd> atom_theta;
    std::vector<double> atom_w;
    AngularFn weight = AngularFn::constant(1.0 / (2.0 * M_PI));  ///< d = 2 angular density

    void validate() const;
    double total_mass() const;
    bool is_symmetric() const;

    /// Quadrature nodes (theta_i, w_i) with sum w_i = total mass. Exact for
    /// atoms; midpoint angle grid for d = 2; Fibonacci sphere for uniform
    /// d = 3.
    void nodes(std::vector<Eigen::VectorXd>& theta, std::vector<double>& w,
               int grid = 4096) const;

    /// One direction from the normalized measure.
    Eigen::VectorXd sample_direction(RngStream& rng) const;

    nlohmann::json to_json() const;
    static SphereMeasure from_json(const nlohmann::json& j);
};

/// Multivariate Levy measure in polar form lambda(du|theta) nu(dtheta)
/// with directional truncated stable conditionals
/// c(theta) 1{0<u<r0} u^{-a(theta)-1} du.
struct RadialLevySpec {
    SphereMeasure nu;
    AngularFn a_fn = AngularFn::constant(1.0);
    AngularFn c_fn = AngularFn::constant(1.0);
    double r0 = 1.0;
    bool symmetric = false;
    bool direction_independent = false;

    void validate() const;
    int dim() const { return nu.d; }
    double a(const Eigen::VectorXd& theta) const { return a_fn(theta); }
    double c(const Eigen::VectorXd& theta) const { return c_fn(theta); }
    /// Closed-form partial cumulant of the conditional at direction theta.
    double radial_partial_cumulant(const Eigen::VectorXd& theta, double j, double r) const;
    bool piecewise_direction_independent() const;

    nlohmann::json to_json() const;
    static RadialLevySpec from_json(const nlohmann::json& j);
};

/// The constants of the direction-wise ninth-order fit for exponent a.
/// j2 carries the per-direction normalization, so that for every ray the
/// Gamma component reproduces the cumulants of the truncated conditional
/// at orders 4, 6 and 8 exactly and leaves a gap of exactly tau^2 at
/// order 2 after calibration.
struct JFuncs {
    double pi;   ///< exponent p = pi(a)
    double j0;   ///< 1/(2-a)
    double j1;   ///< s = j1 r
    double j2;   ///< m = c j2 r^{-1-a-pi}
    double log_j2;
    double j3;   ///< second moment coefficient of the Gamma part
    double j4;   ///< r_tau = j4 (tau^2/c)^{1/(2-a)}
    double jn;   ///< Poisson intensity coefficient: N_tau = c jn r^{-a}
};

/// Unique positive solution of (p+7)(p+8)/((p+5)(p+6)) = (6-a)^2/((4-a)(8-a)).
double pi_of_a(double a);

JFuncs j_functions(double a);

/// Direction second-moment matrix of nu; closed form for uniform measures,
/// exact sums for atoms, quadrature for angular densities.
Eigen::MatrixXd K_nu(const RadialLevySpec& spec);

/// Fitted direction-dependent parameter field at Gaussian scale tau.
struct RadialField {
    double tau = 0.0;
    RadialLevySpec spec;
    Eigen::MatrixXd K;
    Eigen::MatrixXd sqrtK;
    double essup_B = 0.0;  ///< 1.05 x grid ess sup of the residual jump intensity
    double essup_N = 0.0;  ///< 1.05 x grid ess sup of the Gamma jump intensity
    bool centering_available = false;  ///< symmetric or (piecewise) direction independent
    Eigen::VectorXd mu_delta;          ///< centering of Delta_tau (when available)
    Eigen::VectorXd mu_y;              ///< centering of Y_tau (when available)

    double a(const Eigen::VectorXd& th) const { return spec.a(th); }
    double c(const Eigen::VectorXd& th) const { return spec.c(th); }
    double r_tau(const Eigen::VectorXd& th) const;
    double p_tau(const Eigen::VectorXd& th) const;
    double s_tau(const Eigen::VectorXd& th) const;
    double m_tau(const Eigen::VectorXd& th) const;
    double log_m_tau(const Eigen::VectorXd& th) const;
    double B_tau(const Eigen::VectorXd& th) const;
    double N_tau(const Eigen::VectorXd& th) const;

    nlohmann::json to_json() const;
    static RadialField from_json(const nlohmann::json& j);
};

/// Fit the field so every direction contributes Gaussian variance exactly
/// tau^2. Throws TauTooLarge when some r_tau(theta) would reach r0.
RadialField radial_match(const RadialLevySpec& spec, double tau);

/// Counters from thinned Poisson process sampling.
struct ThinningStats {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    double max_acceptance = 0.0;
    std::uint64_t clamped = 0;  ///< acceptance probability above 1 (must stay 0)
};

/// One draw of the centered residual part Delta_tau (tail jumps beyond
/// r_tau(theta), thinned against essup_B).
Eigen::VectorXd sample_delta_tau(const RadialField& field, RngStream& rng,
                                 ThinningStats* stats = nullptr);

/// One draw of the centered compound Gamma part Y_tau.
Eigen::VectorXd sample_Y_tau(const RadialField& field, RngStream& rng,
                             ThinningStats* stats = nullptr);

/// One draw of T_tau = Y_tau + tau K^{1/2} Z.
Eigen::VectorXd sample_T_tau(const RadialField& field, RngStream& rng,
                             ThinningStats* stats = nullptr);

/// Covariance of X_tau (equals that of T_tau) and its symmetric square root.
struct SigmaTau {
    Eigen::MatrixXd Sigma;
    Eigen::MatrixXd A;
};
SigmaTau sigma_tau(const RadialField& field);

enum class MvPart { TTau, DeltaPlusTTau };

/// n chunk-deterministic draws, row-major n x d.
SampleBatch sample_mv_batch(const RadialField& field, std::size_t n, const BatchOptions& opt,
                            MvPart part = MvPart::DeltaPlusTTau, ThinningStats* stats = nullptr);

/// Symmetric positive definite square root with a rank check.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M);

}  // namespace pgn
