#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "oracles.hpp"
#include "pgn/matching.hpp"
#include "pgn/sampler.hpp"
#include "pgn/validation.hpp"

using namespace pgn;

namespace {

LevyMeasure1D canonical() { return LevyMeasure1D(TruncStable{1.0, 1.0, 1.0}); }

std::vector<double> draw_many(const std::function<double(RngStream&)>& f, std::size_t n,
                              std::uint64_t seed) {
    std::vector<double> v(n);
    RngStream rng(seed, 0);
    for (auto& x : v) x = f(rng);
    return v;
}

}  // namespace

TEST_CASE("Y_r edge cases and matched moments") {
    // vanishing intensity: N = 0, U = 0, Y = -E U = 0
    MatchedParams tiny;
    tiny.p = 0.0;
    tiny.s = 1.0;
    tiny.log_m = -720.0;
    tiny.m = 0.0;
    tiny.sigma = 0.0;
    tiny.r = 1.0;
    tiny.q = 5;
    RngStream rng(9, 0);
    for (int i = 0; i < 32; ++i) CHECK(std::fabs(sample_Yr(tiny, rng)) < 1e-300);

    // canonical fit: variance 6/7 and third cumulant 1/2
    auto mp = match5(canonical(), 1.0);
    auto v = draw_many([&](RngStream& r) { return sample_Yr(mp, r); }, 2000000, 11);
    auto cums = empirical_cumulants(v, 4);
    CHECK(std::fabs(cums[0].estimate - 6.0 / 7.0) < 5.0 * cums[0].standard_error);
    CHECK(std::fabs(cums[1].estimate - 0.5) < 5.0 * cums[1].standard_error);
}

TEST_CASE("T_r adds the Gaussian part") {
    auto mp = match5(canonical(), 1.0);
    auto v = draw_many([&](RngStream& r) { return sample_Tr(mp, r); }, 2000000, 12);
    auto cums = empirical_cumulants(v, 4);
    CHECK(std::fabs(cums[0].estimate - 1.0) < 5.0 * cums[0].standard_error);        // kappa_2
    CHECK(std::fabs(cums[2].estimate - 1.0 / 3.0) < 5.0 * cums[2].standard_error);  // kappa_4

    // sigma = 0 leaves the law of Y_r
    MatchedParams flat = mp;
    flat.sigma = 0.0;
    auto vy = draw_many([&](RngStream& r) { return sample_Yr(mp, r); }, 500000, 13);
    auto vt = draw_many([&](RngStream& r) { return sample_Tr(flat, r); }, 500000, 14);
    CHECK(ks_two_sample(vy, vt) < 1.95 * std::sqrt(2.0 / 500000.0));
}

TEST_CASE("pure Gamma subordinator route at p = -1") {
    auto m = LevyMeasure1D(TruncStable{1.0, 1.5, 1.0});
    auto mp = match4(m, 1.0, -1.0);
    auto v = draw_many([&](RngStream& r) { return sample_Tr(mp, r); }, 1000000, 15);
    auto cums = empirical_cumulants(v, 4);
    for (int j = 2; j <= 4; ++j) {
        const double target = partial_cumulant(m, j, 1.0);
        CHECK(std::fabs(cums[j - 2].estimate - target) < 5.0 * cums[j - 2].standard_error);
    }
}

TEST_CASE("Delta_r: tail jumps with exact centering") {
    auto ts = canonical();
    RngStream rng(16, 0);
    CHECK(sample_delta_r(ts, 1.0, rng) == 0.0);  // r at the support edge

    auto v = draw_many([&](RngStream& r) { return sample_delta_r(ts, 0.5, r); }, 2000000, 17);
    auto ms = oracle::batch_mean_se(v);
    CHECK(std::fabs(ms.mean) < 5.0 * ms.se);
    auto cums = empirical_cumulants(v, 2);
    // oracle over [0.5, 1) stopping short of the open support edge
    const double var_expect =
        oracle::simpson([&](double u) { return u * u * ts.density(u); }, 0.5, 1.0 - 1e-9) ;
    CHECK(var_expect == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(std::fabs(cums[0].estimate - var_expect) < 5.0 * cums[0].standard_error);
}

TEST_CASE("tail jump distributions match their CDFs") {
    // closed-form inversion (generic exponent)
    {
        LevyMeasure1D m(TruncStable{1.0, 0.7, 1.0});
        TailSampler tail(m, 0.3);
        const int n = 400000;
        std::vector<double> v(n);
        RngStream rng(18, 0);
        for (auto& x : v) x = tail.draw(rng);
        std::sort(v.begin(), v.end());
        const double total = tail_mass(m, 0.3);
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double F = (total - tail_mass(m, v[i])) / total;
            ks = std::max(ks, std::fabs(F - (i + 1.0) / n));
        }
        CHECK(ks < 1.95 / std::sqrt((double)n));
    }
    // rejection beneath the power envelope (tilted family), and the log tail
    for (auto m : {LevyMeasure1D(TiltedStablePoly{0.9, 1.0, 1, 1.0}),
                   LevyMeasure1D(LogSingular{1.0}),
                   LevyMeasure1D::custom_from_catalog(
                       "tempered_stable", {{"c", 1.0}, {"a", 0.7}, {"b", 3.0}, {"upper", 1.0}})}) {
        TailSampler tail(m, 0.2);
        const int n = 200000;
        std::vector<double> v(n);
        RngStream rng(19, 0);
        for (auto& x : v) x = tail.draw(rng);
        std::sort(v.begin(), v.end());
        const double total = tail_mass(m, 0.2);
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double F = (total - tail_mass(m, v[i])) / total;
            ks = std::max(ks, std::fabs(F - (i + 1.0) / n));
        }
        CAPTURE(m.family_name());
        CHECK(ks < 1.95 / std::sqrt((double)n));
        CHECK(tail.acceptance_rate() > 0.05);
    }
}

TEST_CASE("assembled sampler: cumulant additivity and determinism") {
    auto ts = canonical();
    auto mp = match5(ts, 0.5);
    BatchOptions bo;
    bo.master_seed = 20;

    auto empty = sample_pgn(ts, 0.5, mp, 0, bo);
    CHECK(empty.values.empty());

    auto batch = sample_pgn(ts, 0.5, mp, 2000000, bo);
    auto cums = empirical_cumulants(batch.values, 4);
    CHECK(std::fabs(cums[0].estimate - 1.0) < 5.0 * cums[0].standard_error);  // full kappa_2
    CHECK(std::fabs(cums[1].estimate - 0.5) < 5.0 * cums[1].standard_error);  // full kappa_3

    BatchOptions bo8 = bo;
    bo8.threads = 8;
    auto batch8 = sample_pgn(ts, 0.5, mp, 2000000, bo8);
    CHECK(batch.values == batch8.values);  // bitwise thread independence

    BatchOptions shifted = bo;
    shifted.stream_base = 1000;
    CHECK(sample_pgn(ts, 0.5, mp, 1000, shifted).values != sample_pgn(ts, 0.5, mp, 1000, bo).values);
}

TEST_CASE("symmetric sampler kills odd cumulants") {
    auto ts = canonical();
    auto mp = match_sym9(ts, 0.5);
    BatchOptions bo;
    bo.master_seed = 21;
    auto batch = sample_pgn(ts, 0.5, mp, 2000000, bo);
    auto cums = empirical_cumulants(batch.values, 5);
    CHECK(std::fabs(cums[0].estimate - 2.0) < 5.0 * cums[0].standard_error);  // 2 kappa_2
    CHECK(std::fabs(cums[1].estimate) < 5.0 * cums[1].standard_error);        // kappa_3 = 0
    CHECK(std::fabs(cums[3].estimate) < 5.0 * cums[3].standard_error);        // kappa_5 = 0
}

TEST_CASE("normal baseline: variance and residual skew") {
    auto ts = canonical();
    BatchOptions bo;
    bo.master_seed = 22;
    auto batch = sample_normal_baseline(ts, 0.5, 2000000, bo);
    auto cums = empirical_cumulants(batch.values, 3);
    CHECK(std::fabs(cums[0].estimate - 1.0) < 5.0 * cums[0].standard_error);
    // the Gaussian leg contributes no skew; what remains is the tail's
    const double k3_tail = oracle::simpson([&](double u) { return u * u * u * ts.density(u); }, 0.5, 1.0 - 1e-9);
    CHECK(std::fabs(cums[1].estimate - k3_tail) < 5.0 * cums[1].standard_error);

    // r at the support edge: pure Gaussian with the full second cumulant
    auto pure = sample_normal_baseline(ts, 1.0, 500000, bo);
    auto c2 = empirical_cumulants(pure.values, 2);
    CHECK(std::fabs(c2[0].estimate - 1.0) < 5.0 * c2[0].standard_error);
}

TEST_CASE("batch export round trips") {
    auto ts = canonical();
    auto mp = match5(ts, 1.0);
    BatchOptions bo;
    bo.master_seed = 23;
    auto batch = sample_pgn(ts, 1.0, mp, 1000, bo);
    CHECK(batch.spec_hash.size() == 64);

    const auto dir = std::filesystem::temp_directory_path();
    const std::string bin = (dir / "pgn_test_batch.bin").string();
    const std::string csv = (dir / "pgn_test_batch.csv").string();
    write_binary(batch, bin);
    write_csv(batch, csv);

    auto back = read_binary(bin);
    CHECK(back.values == batch.values);
    CHECK(back.n == batch.n);
    CHECK(back.dim == 1);
    CHECK(back.master_seed == batch.master_seed);
    CHECK(back.spec_hash == batch.spec_hash);

    std::FILE* f = std::fopen(csv.c_str(), "rb");
    REQUIRE(f);
    char line[64];
    REQUIRE(std::fgets(line, sizeof line, f));
    std::fclose(f);
    CHECK(std::strtod(line, nullptr) == doctest::Approx(batch.values[0]).epsilon(1e-16));

    std::filesystem::remove(bin);
    std::filesystem::remove(csv);
}

TEST_CASE("grid fidelity: matched cumulants reproduced at 1e7 draws") {
    // full-measure cumulants of orders 2..min(q-1, 6) recovered within five
    // batch-means standard errors over the truncated-stable grid
    BatchOptions bo;
    bo.master_seed = 424213;
    for (double a : {0.5, 1.0, 1.5}) {
        for (double r : {0.5, 0.1}) {
            auto m = LevyMeasure1D(TruncStable{1.0, a, 1.0});
            auto mp = match5(m, r);
            bo.stream_base += 1u << 22;
            auto batch = sample_pgn(m, r, mp, 10000000, bo);
            auto cums = empirical_cumulants(batch.values, std::min(mp.q - 1, 6));
            for (const auto& c : cums) {
                const double target = partial_cumulant(m, c.order, 1.0);
                CAPTURE(a);
                CAPTURE(r);
                CAPTURE(c.order);
                CHECK(std::fabs(c.estimate - target) < 5.0 * c.standard_error);
            }
        }
    }
}

TEST_CASE("throughput stays O(1 + tail mass) per draw") {
    // at r = r0 the residual part is empty; a million draws must be quick
    auto ts = canonical();
    auto mp = match5(ts, 1.0);
    BatchOptions bo;
    bo.master_seed = 24;
    const auto t0 = std::chrono::steady_clock::now();
    auto b = sample_pgn(ts, 1.0, mp, 1000000, bo);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(b.n == 1000000);
    CHECK(dt < 10.0);  // the CLI-level contract is < 10 s for this workload
}
