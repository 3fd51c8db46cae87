#pragma once

#include <stdexcept>
#include <string>

namespace pgn {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Quadrature failed to converge or the integral diverges.
struct NonIntegrable : std::runtime_error {
    explicit NonIntegrable(const std::string& msg) : std::runtime_error(msg) {}
};

/// A cumulant-matching feasibility condition failed. The message names
/// the condition that was violated.
struct MatchInfeasible : std::runtime_error {
    explicit MatchInfeasible(const std::string& msg) : std::runtime_error(msg) {}
};

/// Root finding could not bracket or refine a solution.
struct RootBracketError : std::runtime_error {
    explicit RootBracketError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An error-bound hypothesis does not hold for the supplied parameters.
struct HypothesisViolated : std::runtime_error {
    explicit HypothesisViolated(const std::string& msg) : std::runtime_error(msg) {}
};

/// A matrix that must be positive definite is numerically rank deficient.
struct RankDeficient : std::runtime_error {
    explicit RankDeficient(const std::string& msg) : std::runtime_error(msg) {}
};

/// The requested Gaussian scale is too large for the radial family support.
struct TauTooLarge : std::runtime_error {
    explicit TauTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

/// The centering constant of a multivariate compound Poisson part has no
/// closed form for this spec; sampling refuses rather than biasing.
struct CenteringUnavailable : std::runtime_error {
    explicit CenteringUnavailable(const std::string& msg) : std::runtime_error(msg) {}
};

/// A sample is too small for the requested statistic.
struct InsufficientSample : std::runtime_error {
    explicit InsufficientSample(const std::string& msg) : std::runtime_error(msg) {}
};

/// Empty input where at least one observation is required.
struct EmptySample : std::invalid_argument {
    explicit EmptySample(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace pgn
