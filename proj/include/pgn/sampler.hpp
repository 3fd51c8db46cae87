#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/levy_measure.hpp"
#include "pgn/matching.hpp"
#include "pgn/rng.hpp"

namespace pgn {

/// Seed-deterministic array of variates with provenance. For dim > 1 the
/// values are row major (draw index fastest over coordinates).
struct SampleBatch {
    std::vector<double> values;
    std::size_t n = 0;
    int dim = 1;
    std::uint64_t master_seed = 0;
    std::uint64_t stream_base = 0;
    std::string spec_hash;  // hex SHA-256 of the generating spec

    double operator[](std::size_t i) const { return values[i]; }
};

/// Draws a single jump from the normalized tail of the measure on
/// [r, upper_support). Closed-form inversion for the parametric families,
/// rejection beneath a fitted power-law envelope for custom densities with
/// a table-inversion fallback when the acceptance rate is poor.
class TailSampler {
public:
    TailSampler(const LevyMeasure1D& measure, double r);

    double draw(RngStream& rng) const;

    double acceptance_rate() const;  // 1 for closed-form families

private:
    void build_table(const LevyMeasure1D& measure);

    enum class Kind { PowerLaw, PowerLawA1, PowerLawAHalf, LogTail, Reject, Table };
    Kind kind_;
    double r_ = 0, upper_ = 0;
    double a_ = 0, ir_ = 0, irdiff_ = 0;           // power-law state
    double log_r_ = 0;                              // log tail state
    double env_a_ = 0, env_scale_ = 0;              // rejection envelope state
    std::function<double(double)> density_;
    double tilt_b_ = 0;
    int tilt_n_ = 0;
    mutable std::uint64_t proposals_ = 0, accepts_ = 0;
    std::vector<double> table_u_;                   // inverse-CDF nodes
};

/// Per-fit constants for the compound Gamma part, derived once.
struct YrSampler {
    double p = 0, s = 0, sigma = 0;
    double pois_rate = 0;   // Gamma(p+1) m s^{p+1}
    double mean_u = 0;      // Gamma(p+2) m s^{p+2}
    double gamma_shape_m = 0;  // shape when p == -1 (pure Gamma subordinator)
    bool pure_gamma = false;
    bool symmetric = false;

    explicit YrSampler(const MatchedParams& params);
    double draw_U(RngStream& rng) const;
};

/// One Gamma variate; see RngStream::gamma.
double sample_gamma(double shape, double scale, RngStream& rng);

/// One Poisson variate; see RngStream::poisson.
long long sample_poisson(double rate, RngStream& rng);

/// One draw of the centered compound Gamma part Y_r (difference of two
/// independent one-sided draws when the fit is symmetric).
double sample_Yr(const MatchedParams& params, RngStream& rng);
double sample_Yr(const YrSampler& ctx, RngStream& rng);

/// One draw of T_r = Y_r + sigma Z.
double sample_Tr(const MatchedParams& params, RngStream& rng);
double sample_Tr(const YrSampler& ctx, RngStream& rng);

/// One draw of the centered residual jump part Delta_r. For symmetric
/// specs the jumps of the two one-sided factors are drawn independently
/// and the centering cancels.
double sample_delta_r(const LevyMeasure1D& measure, double r, RngStream& rng,
                      bool symmetric = false);

struct BatchOptions {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_base = 0;  ///< offset into the stream-id space
    int threads = 1;
    std::size_t chunk = 65536;
};

/// n i.i.d. draws of Delta_r + T_r. Chunked across fixed-size blocks with
/// stream id = stream_base + chunk index, so results are bitwise
/// independent of the thread count.
SampleBatch sample_pgn(const LevyMeasure1D& measure, double r, const MatchedParams& params,
                       std::size_t n, const BatchOptions& opt);

/// n draws of the second-order baseline Delta_r + sqrt(kappa_{2,X_r}) Z.
SampleBatch sample_normal_baseline(const LevyMeasure1D& measure, double r, std::size_t n,
                                   const BatchOptions& opt, bool symmetric = false);

/// CSV export, one row per draw, RFC 4180, '.' decimal, LF endings.
void write_csv(const SampleBatch& batch, const std::string& path);

/// Binary export: magic "PGN1", u32 dim, u64 n, u64 seed, 32-byte spec
/// hash, then n*dim little-endian doubles.
void write_binary(const SampleBatch& batch, const std::string& path);
SampleBatch read_binary(const std::string& path);

}  // namespace pgn
