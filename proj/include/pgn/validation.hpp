#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "pgn/bounds.hpp"
#include "pgn/radial.hpp"
#include "pgn/sampler.hpp"

namespace pgn {

/// Batch-means estimate of one cumulant order.
struct CumulantEstimate {
    int order = 0;
    double estimate = 0.0;
    double standard_error = 0.0;
    std::size_t n = 0;
    int batches = 0;
};

/// Cumulants of order 2..j_max from central moments, estimated per batch
/// and averaged; the spread across batches gives the standard error.
std::vector<CumulantEstimate> empirical_cumulants(std::span<const double> values, int j_max = 6,
                                                  int n_batches = 100);

/// Exact sup distance between the empirical CDFs of two samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Worst relative mismatch between the cumulants of the fitted T_r and the
/// cumulants of X_r recomputed by raw adaptive quadrature (never the
/// closed forms the fit used).
double quadrature_match_check(const LevyMeasure1D& measure, const MatchedParams& params);

struct RatePoint {
    double r = 0.0;
    double dks_pgn = 0.0, se_pgn = 0.0;
    double dks_normal = 0.0, se_normal = 0.0;
    bool fit_pgn = false, fit_normal = false;  ///< above 3x the noise floor
};

struct RateStudyResult {
    std::vector<RatePoint> points;
    double slope_pgn = 0.0, slope_pgn_se = 0.0;
    double slope_normal = 0.0, slope_normal_se = 0.0;
    int used_pgn = 0, used_normal = 0;
    bool noise_floor = false;  ///< too few points above the floor to fit
    double r_ref = 0.0;
    double noise_level = 0.0;  ///< 95% null quantile of the two-sample statistic

    nlohmann::json to_json() const;
};

struct RateStudyOptions {
    std::size_t n = 100000;
    double reference_factor = 100.0;
    bool symmetric = false;
    std::uint64_t master_seed = 0;
    int threads = 1;
    /// Compare the small-jump laws (T_r and N(0, kappa_2(r)) against a fine
    /// PGN reference for X_r). The common residual part Delta_r smooths the
    /// full laws so strongly that their KS distance collapses below any
    /// reachable Monte Carlo resolution and decays far faster than the
    /// classical rates; the small-jump comparison is the one the rates
    /// describe. Set false to compare the full laws Delta_r + T_r.
    bool small_parts = true;
};

/// Kolmogorov-Smirnov decay study of the PGN sampler against the
/// second-order normal baseline. The reference arm is the PGN sampler at
/// r_ref = min(grid)/reference_factor; slopes are weighted least squares
/// on the log-log points above three times the noise floor.
RateStudyResult rate_study(const LevyMeasure1D& measure, const std::vector<double>& r_grid,
                           const RateStudyOptions& opt);

struct MvCovReport {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd expected_cov;
    double max_abs_z_mean = 0.0;
    double max_abs_z_cov = 0.0;
    std::size_t n = 0;

    nlohmann::json to_json() const;
};

/// Empirical mean and covariance of n draws of T_tau against the exact
/// Sigma_tau, with componentwise z-scores from empirical fourth moments.
MvCovReport mv_cov_check(const RadialField& field, std::size_t n, const BatchOptions& opt);

/// Weighted least-squares slope of y on x. Returns {slope, se}.
std::pair<double, double> wls_slope(const std::vector<double>& x, const std::vector<double>& y,
                                    const std::vector<double>& weight);

}  // namespace pgn
