#include "pgn/sampler.hpp"

#include <atomic>
#include <optional>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "pgn/errors.hpp"
#include "pgn/sha256.hpp"
#include "pgn/special.hpp"

namespace pgn {

// ---------------------------------------------------------------------------
// TailSampler

TailSampler::TailSampler(const LevyMeasure1D& measure, double r) {
    if (!(r > 0.0)) throw DomainError("TailSampler: r > 0 required");
    r_ = r;
    upper_ = measure.upper_support();
    if (const auto* ts = std::get_if<TruncStable>(&measure.family())) {
        a_ = ts->a;
        ir_ = std::pow(r_, -a_);
        irdiff_ = ir_ - std::pow(upper_, -a_);
        if (a_ == 1.0) kind_ = Kind::PowerLawA1;
        else if (a_ == 0.5) kind_ = Kind::PowerLawAHalf;
        else kind_ = Kind::PowerLaw;
        return;
    }
    if (std::get_if<LogSingular>(&measure.family())) {
        log_r_ = std::log(r_);
        kind_ = Kind::LogTail;
        return;
    }
    if (const auto* tp = std::get_if<TiltedStablePoly>(&measure.family())) {
        // Proposal u^{-a-1} on [r, r0]; accept with f_n(u^b) which lies in
        // (0, 1] on the support.
        a_ = tp->a;
        ir_ = std::pow(r_, -a_);
        irdiff_ = ir_ - std::pow(upper_, -a_);
        tilt_b_ = tp->b;
        tilt_n_ = tp->n;
        kind_ = Kind::Reject;
        env_a_ = a_;
        env_scale_ = 1.0;
        density_ = nullptr;
        return;
    }
    // Custom: power-law envelope anchored by probing the density at
    // logarithmically spaced points; switch to table inversion when the
    // observed acceptance is poor.
    const auto& cm = std::get<CustomMeasure>(measure.family());
    env_a_ = cm.singularity_exponent_hint;
    density_ = cm.density;
    double scale = 0.0;
    const int probes = 65;
    for (int i = 0; i <= probes; ++i) {
        const double u = r_ * std::pow(upper_ / r_, static_cast<double>(i) / probes);
        scale = std::max(scale, cm.density(u) * std::pow(u, env_a_ + 1.0));
    }
    env_scale_ = 1.2 * scale;
    ir_ = std::pow(r_, -env_a_);
    irdiff_ = ir_ - std::pow(upper_, -env_a_);
    kind_ = Kind::Reject;

    // Estimate the envelope acceptance by quadrature; the envelope measure
    // has mass env_scale * irdiff / env_a.
    QuadResult mass = integrate([&](double u) { return cm.density(u); }, r_, upper_);
    const double env_mass = env_scale_ * irdiff_ / env_a_;
    if (env_mass > 0.0 && mass.value / env_mass < 0.1) {
        build_table(measure);
        kind_ = Kind::Table;
    }
}

void TailSampler::build_table(const LevyMeasure1D& measure) {
    // 64-panel inverse CDF table: u at quantiles k/64 of the normalized tail.
    const int kn = 64;
    const double total = tail_mass(measure, r_);
    table_u_.assign(kn + 1, 0.0);
    table_u_[0] = r_;
    table_u_[kn] = upper_;
    for (int k = 1; k < kn; ++k) {
        const double target = total * static_cast<double>(k) / kn;
        double lo = r_, hi = upper_;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double mass = total - tail_mass(measure, mid);
            if (mass < target) lo = mid; else hi = mid;
        }
        table_u_[k] = 0.5 * (lo + hi);
    }
}

double TailSampler::draw(RngStream& rng) const {
    switch (kind_) {
        case Kind::PowerLawA1:
            return 1.0 / (ir_ - rng.uniform() * irdiff_);
        case Kind::PowerLawAHalf: {
            const double x = ir_ - rng.uniform() * irdiff_;
            return 1.0 / (x * x);
        }
        case Kind::PowerLaw:
            return std::pow(ir_ - rng.uniform() * irdiff_, -1.0 / a_);
        case Kind::LogTail:
            // CDF of the normalized log tail inverts to u = r^{sqrt(1-V)}
            return std::exp(log_r_ * std::sqrt(1.0 - rng.uniform()));
        case Kind::Table: {
            const double v = rng.uniform() * 64.0;
            const int k = std::min(63, static_cast<int>(v));
            const double frac = v - k;
            return table_u_[k] + frac * (table_u_[k + 1] - table_u_[k]);
        }
        case Kind::Reject:
            break;
    }
    for (;;) {
        ++proposals_;
        const double u = std::pow(ir_ - rng.uniform() * irdiff_, -1.0 / env_a_);
        double accept;
        if (density_) {
            accept = density_(u) / (env_scale_ * std::pow(u, -env_a_ - 1.0));
        } else {
            accept = tilt_poly(tilt_n_, std::pow(u, tilt_b_));
        }
        if (rng.uniform() < accept) {
            ++accepts_;
            return u;
        }
    }
}

double TailSampler::acceptance_rate() const {
    if (kind_ != Kind::Reject || proposals_ == 0) return 1.0;
    return static_cast<double>(accepts_) / static_cast<double>(proposals_);
}

// ---------------------------------------------------------------------------
// Y_r and T_r

YrSampler::YrSampler(const MatchedParams& params) {
    p = params.p;
    s = params.s;
    sigma = params.sigma;
    symmetric = params.symmetric;
    if (p == -1.0) {
        pure_gamma = true;
        gamma_shape_m = std::exp(params.log_m);
        mean_u = std::exp(gamma_levy_cumulant_log(p, std::log(s), params.log_m, 1.0));
    } else {
        pois_rate = std::exp(log_gamma(p + 1.0) + params.log_m + (p + 1.0) * std::log(s));
        mean_u = std::exp(log_gamma(p + 2.0) + params.log_m + (p + 2.0) * std::log(s));
    }
}

double YrSampler::draw_U(RngStream& rng) const {
    if (pure_gamma) return rng.gamma(gamma_shape_m, s);
    if (pois_rate == 0.0) return 0.0;
    const long long n = rng.poisson(pois_rate);
    if (n == 0) return 0.0;
    // Conditional on the jump count, the sum of n Gamma(p+1, s) jumps is a
    // single Gamma(n (p+1), s) draw.
    return rng.gamma(static_cast<double>(n) * (p + 1.0), s);
}

double sample_gamma(double shape, double scale, RngStream& rng) { return rng.gamma(shape, scale); }

long long sample_poisson(double rate, RngStream& rng) { return rng.poisson(rate); }

double sample_Yr(const YrSampler& ctx, RngStream& rng) {
    if (ctx.symmetric) return ctx.draw_U(rng) - ctx.draw_U(rng);
    return ctx.draw_U(rng) - ctx.mean_u;
}

double sample_Yr(const MatchedParams& params, RngStream& rng) {
    return sample_Yr(YrSampler(params), rng);
}

double sample_Tr(const YrSampler& ctx, RngStream& rng) {
    return sample_Yr(ctx, rng) + ctx.sigma * rng.normal();
}

double sample_Tr(const MatchedParams& params, RngStream& rng) {
    return sample_Tr(YrSampler(params), rng);
}

// ---------------------------------------------------------------------------
// Delta_r

namespace {

struct DeltaSampler {
    double rate = 0.0;
    double mean = 0.0;
    bool symmetric = false;
    const TailSampler* tail = nullptr;

    double draw(RngStream& rng) const {
        if (rate == 0.0) return 0.0;
        double sum = 0.0;
        const long long n = rng.poisson(rate);
        for (long long i = 0; i < n; ++i) sum += tail->draw(rng);
        if (symmetric) {
            const long long n2 = rng.poisson(rate);
            for (long long i = 0; i < n2; ++i) sum -= tail->draw(rng);
            return sum;  // centering cancels between the two sides
        }
        return sum - mean;
    }
};

}  // namespace

double sample_delta_r(const LevyMeasure1D& measure, double r, RngStream& rng, bool symmetric) {
    if (!(r > 0.0)) throw DomainError("sample_delta_r: r > 0 required");
    if (r >= measure.upper_support()) return 0.0;
    TailSampler tail(measure, r);
    DeltaSampler d;
    d.rate = tail_mass(measure, r);
    d.mean = tail_mean(measure, r);
    d.symmetric = symmetric;
    d.tail = &tail;
    return d.draw(rng);
}

// ---------------------------------------------------------------------------
// Batch generation

namespace {

template <typename DrawFn>
void run_chunked(std::vector<double>& values, std::size_t n, int dim, const BatchOptions& opt,
                 const DrawFn& draw) {
    const std::size_t chunk = opt.chunk == 0 ? 65536 : opt.chunk;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n_chunks) return;
            RngStream rng(opt.master_seed, opt.stream_base + k);
            const std::size_t lo = k * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            for (std::size_t i = lo; i < hi; ++i) draw(rng, &values[i * dim]);
        }
    };
    const int threads = std::max(1, opt.threads);
    if (threads == 1 || n_chunks <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace

SampleBatch sample_pgn(const LevyMeasure1D& measure, double r, const MatchedParams& params,
                       std::size_t n, const BatchOptions& opt) {
    SampleBatch batch;
    batch.n = n;
    batch.dim = 1;
    batch.master_seed = opt.master_seed;
    batch.stream_base = opt.stream_base;
    {
        nlohmann::json spec = {{"kind", "pgn"}, {"measure", measure.to_json()},
                               {"r", r}, {"params", params.to_json()}};
        batch.spec_hash = sha256_hex(spec.dump());
    }
    batch.values.resize(n);
    if (n == 0) return batch;

    const YrSampler yr(params);
    const bool has_tail = r < measure.upper_support();
    std::optional<TailSampler> tail;
    DeltaSampler delta;
    if (has_tail) {
        tail.emplace(measure, r);
        delta.rate = tail_mass(measure, r);
        delta.mean = tail_mean(measure, r);
        delta.symmetric = params.symmetric;
        delta.tail = &*tail;
    }
    run_chunked(batch.values, n, 1, opt, [&](RngStream& rng, double* out) {
        double v = sample_Tr(yr, rng);
        if (has_tail) v += delta.draw(rng);
        *out = v;
    });
    return batch;
}

SampleBatch sample_normal_baseline(const LevyMeasure1D& measure, double r, std::size_t n,
                                   const BatchOptions& opt, bool symmetric) {
    SampleBatch batch;
    batch.n = n;
    batch.dim = 1;
    batch.master_seed = opt.master_seed;
    batch.stream_base = opt.stream_base;
    {
        nlohmann::json spec = {{"kind", "normal_baseline"}, {"measure", measure.to_json()},
                               {"r", r}, {"symmetric", symmetric}};
        batch.spec_hash = sha256_hex(spec.dump());
    }
    batch.values.resize(n);
    if (n == 0) return batch;

    const double k2 = (symmetric ? 2.0 : 1.0) * partial_cumulant(measure, 2, std::min(r, measure.upper_support()));
    const double sd = std::sqrt(k2);
    const bool has_tail = r < measure.upper_support();
    std::optional<TailSampler> tail;
    DeltaSampler delta;
    if (has_tail) {
        tail.emplace(measure, r);
        delta.rate = tail_mass(measure, r);
        delta.mean = tail_mean(measure, r);
        delta.symmetric = symmetric;
        delta.tail = &*tail;
    }
    run_chunked(batch.values, n, 1, opt, [&](RngStream& rng, double* out) {
        double v = sd * rng.normal();
        if (has_tail) v += delta.draw(rng);
        *out = v;
    });
    return batch;
}

// ---------------------------------------------------------------------------
// Export

void write_csv(const SampleBatch& batch, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    char buf[32];
    for (std::size_t i = 0; i < batch.n; ++i) {
        for (int d = 0; d < batch.dim; ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", batch.values[i * batch.dim + d]);
            std::fputs(buf, f);
            std::fputc(d + 1 < batch.dim ? ',' : '\n', f);
        }
    }
    std::fclose(f);
}

void write_binary(const SampleBatch& batch, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write("PGN1", 4);
    const std::uint32_t d = static_cast<std::uint32_t>(batch.dim);
    const std::uint64_t n = batch.n;
    const std::uint64_t seed = batch.master_seed;
    f.write(reinterpret_cast<const char*>(&d), 4);
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(&seed), 8);
    std::uint8_t hash[32] = {0};
    for (int i = 0; i < 32 && 2 * i + 1 < static_cast<int>(batch.spec_hash.size()); ++i) {
        auto nib = [](char ch) -> std::uint8_t {
            return ch <= '9' ? ch - '0' : ch - 'a' + 10;
        };
        hash[i] = static_cast<std::uint8_t>((nib(batch.spec_hash[2 * i]) << 4) |
                                            nib(batch.spec_hash[2 * i + 1]));
    }
    f.write(reinterpret_cast<const char*>(hash), 32);
    f.write(reinterpret_cast<const char*>(batch.values.data()),
            static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
}

SampleBatch read_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "PGN1", 4) != 0) throw std::runtime_error(path + ": bad magic");
    SampleBatch batch;
    std::uint32_t d;
    std::uint64_t n, seed;
    f.read(reinterpret_cast<char*>(&d), 4);
    f.read(reinterpret_cast<char*>(&n), 8);
    f.read(reinterpret_cast<char*>(&seed), 8);
    std::uint8_t hash[32];
    f.read(reinterpret_cast<char*>(hash), 32);
    static const char* hex = "0123456789abcdef";
    batch.spec_hash.resize(64);
    for (int i = 0; i < 32; ++i) {
        batch.spec_hash[2 * i] = hex[hash[i] >> 4];
        batch.spec_hash[2 * i + 1] = hex[hash[i] & 0xf];
    }
    batch.dim = static_cast<int>(d);
    batch.n = n;
    batch.master_seed = seed;
    batch.values.resize(n * d);
    f.read(reinterpret_cast<char*>(batch.values.data()),
           static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
    if (!f) throw std::runtime_error(path + ": truncated payload");
    return batch;
}

}  // namespace pgn
