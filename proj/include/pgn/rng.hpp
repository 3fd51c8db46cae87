#pragma once

#include <cstdint>

namespace pgn {

/// Counter-based stream built on Philox4x32-10. A (master_seed, stream_id)
/// pair fully determines the sequence, so the k-th variate of a stream is
/// the same no matter which thread draws it. Distinct stream ids give
/// statistically independent streams.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Standard normal (Box-Muller; the spare value is cached).
    double normal();

    /// Gamma(shape, scale), expected constant work for every shape.
    /// Marsaglia-Tsang squeeze for shape >= 1, boosting for shape < 1.
    double gamma(double shape, double scale);

    /// Poisson(rate), bounded expected work for every rate: sequential
    /// inversion below 10, transformed rejection (PTRD) above.
    long long poisson(double rate);

private:
    void refill();

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint32_t key_[2];
    std::uint64_t block_ = 0;     // philox counter, low 64 bits
    std::uint32_t out_[4];
    int out_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// SplitMix64 finalizer; used to derive stream keys from seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pgn
