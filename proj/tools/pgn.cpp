// Command-line front end: fit, sample, bound, validate and rate-study
// runs driven by JSON specs, reproducible from one seed.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgn/bounds.hpp"
#include "pgn/errors.hpp"
#include "pgn/matching.hpp"
#include "pgn/radial.hpp"
#include "pgn/sampler.hpp"
#include "pgn/sha256.hpp"
#include "pgn/validation.hpp"

using nlohmann::json;
using namespace pgn;

namespace {

constexpr int kExitGateFail = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSchema = 3;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
}

// accepts a file path or an inline JSON object (as written into sidecars)
LevyMeasure1D load_measure(const std::string& path) {
    try {
        if (!path.empty() && path.front() == '{')
            return LevyMeasure1D::from_json(json::parse(path));
        return LevyMeasure1D::from_json(load_json(path));
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const DomainError& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

RadialLevySpec load_radial(const std::string& path) {
    try {
        if (!path.empty() && path.front() == '{')
            return RadialLevySpec::from_json(json::parse(path));
        return RadialLevySpec::from_json(load_json(path));
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const DomainError& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

// "start:end:logN" -> N log-spaced values from start to end; an optional
// "r=" or "tau=" prefix is tolerated
std::vector<double> parse_sweep(std::string s) {
    if (const auto eq = s.find('='); eq != std::string::npos) s = s.substr(eq + 1);
    const auto p1 = s.find(':');
    const auto p2 = s.find(':', p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos || s.substr(p2 + 1, 3) != "log")
        throw SchemaError("sweep syntax is start:end:logN, got '" + s + "'");
    const double start = std::stod(s.substr(0, p1));
    const double end = std::stod(s.substr(p1 + 1, p2 - p1 - 1));
    const int n = std::stoi(s.substr(p2 + 4));
    if (n < 2 || !(start > 0.0) || !(end > 0.0)) throw SchemaError("bad sweep '" + s + "'");
    std::vector<double> out;
    for (int i = 0; i < n; ++i)
        out.push_back(start * std::pow(end / start, static_cast<double>(i) / (n - 1)));
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    if (s.find(":") != std::string::npos) return parse_sweep(s);
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw SchemaError("empty grid '" + s + "'");
    return out;
}

int env_threads() {
    if (const char* v = std::getenv("PGN_THREADS")) return std::max(1, std::atoi(v));
    return 1;
}

// every file artifact gets a sidecar naming its exact inputs
void write_sidecar(const std::string& out_path, const std::string& command, const json& config,
                   double wall_s, double throughput) {
    json side = {{"command", command},
                 {"config", config},
                 {"config_hash", sha256_hex(config.dump())},
                 {"wall_time_s", wall_s},
                 {"throughput_per_s", throughput}};
    write_text(out_path + ".meta.json", side.dump(2) + "\n");
}

double default_p_for(const LevyMeasure1D& measure, bool symmetric) {
    if (const auto* ts = std::get_if<TruncStable>(&measure.family()))
        return symmetric ? stable_p_sym(ts->a) : stable_p_asym(ts->a);
    return 8.0;
}

MatchedParams fit_from_cli(const LevyMeasure1D& measure, double r, const std::string& order,
                           double p, bool have_p, bool symmetric, bool fallback,
                           std::string* warning = nullptr) {
    if (order == "auto") return match_auto(measure, r, symmetric, fallback, warning);
    if (order == "4") return match4(measure, r, have_p ? p : default_p_for(measure, false));
    if (order == "5") return match5(measure, r);
    if (order == "7") return match_sym7(measure, r, have_p ? p : default_p_for(measure, true));
    if (order == "9") return match_sym9(measure, r);
    throw SchemaError("order must be one of auto,4,5,7,9");
}

std::string csvnum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poisson-Gamma-Normal small-jump approximation toolkit"};
    app.require_subcommand(1);

    std::string spec_path, params_path, out_path = "-", config_path, order = "auto";
    std::string format = "csv", sweep, grid_str = "0.4,0.2,0.1,0.05", part = "full";
    std::string rate_mode = "asymptotic", suite = "quick";
    double r = 0.0, tau = 0.0, p_opt = 0.0, nd = 100000, reference_factor = 100.0;
    std::uint64_t seed = 0;
    int threads = env_threads(), q_opt = 10;
    bool symmetric = false, fallback = false, full_law = false, baseline = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run-config JSON; CLI flags take precedence");
        cmd->add_option("--seed", seed, "master seed; all randomness derives from it");
        cmd->add_option("--threads", threads, "worker threads (default $PGN_THREADS or 1)");
        cmd->add_option("-o,--out", out_path, "output file ('-' for stdout)");
    };

    CLI::App* c_match = app.add_subcommand("match", "fit PGN parameters for a 1d measure");
    c_match->add_option("--spec", spec_path, "Levy measure JSON (or via --config)");
    c_match->add_option("--r", r, "truncation radius (or via --config)");
    c_match->add_option("--order", order, "auto,4,5,7,9");
    auto* popt = c_match->add_option("--p", p_opt, "exponent for orders 4/7");
    c_match->add_flag("--symmetric", symmetric, "fit the symmetric two-sided law");
    c_match->add_flag("--fallback-order", fallback, "retry a lower order when infeasible");
    add_common(c_match);

    CLI::App* c_sample = app.add_subcommand("sample", "draw Delta_r + T_r to a batch file");
    c_sample->add_option("--spec", spec_path, "measure JSON (or via --config/sidecar)");
    c_sample->add_option("--r", r);
    c_sample->add_option("--params", params_path, "fit JSON (default: inline auto fit)");
    c_sample->add_option("--n", nd, "number of draws");
    c_sample->add_option("--order", order);
    c_sample->add_option("--format", format, "csv or bin");
    c_sample->add_flag("--symmetric", symmetric);
    c_sample->add_flag("--baseline", baseline, "sample the normal baseline instead");
    add_common(c_sample);

    CLI::App* c_mvmatch = app.add_subcommand("mv-match", "fit the radial parameter field");
    c_mvmatch->add_option("--spec", spec_path, "radial spec JSON")->required();
    c_mvmatch->add_option("--tau", tau)->required();
    add_common(c_mvmatch);

    CLI::App* c_mvsample = app.add_subcommand("mv-sample", "draw Delta_tau + T_tau");
    c_mvsample->add_option("--spec", spec_path, "radial spec JSON (or via --config/sidecar)");
    c_mvsample->add_option("--tau", tau);
    c_mvsample->add_option("--n", nd);
    c_mvsample->add_option("--part", part, "full or T");
    c_mvsample->add_option("--format", format, "csv or bin");
    add_common(c_mvsample);

    CLI::App* c_bound = app.add_subcommand("bound", "evaluate the 1d total-variation bound");
    c_bound->add_option("--spec", spec_path)->required();
    c_bound->add_option("--r", r, "single radius (JSON report)");
    c_bound->add_option("--sweep", sweep, "radius sweep start:end:logN (CSV table)");
    c_bound->add_option("--order", order);
    c_bound->add_option("--rate-mode", rate_mode,
                        "Q factors in the sweep slope: asymptotic (limit values) or live");
    c_bound->add_flag("--symmetric", symmetric);
    add_common(c_bound);

    CLI::App* c_mvbound = app.add_subcommand("mv-bound",
                                             "multivariate bound diagnostics (modulo constant)");
    c_mvbound->add_option("--spec", spec_path)->required();
    c_mvbound->add_option("--tau", tau)->required();
    c_mvbound->add_option("--q", q_opt, "moment order (>= 5)");
    add_common(c_mvbound);

    CLI::App* c_rate = app.add_subcommand("rate", "KS decay study, PGN vs normal baseline");
    c_rate->add_option("--spec", spec_path)->required();
    c_rate->add_option("--grid", grid_str, "comma list or start:end:logN, decreasing");
    c_rate->add_option("--n", nd, "draws per point");
    c_rate->add_option("--reference-factor", reference_factor);
    c_rate->add_flag("--full-law", full_law,
                     "compare full laws Delta_r + T_r (default: small-jump parts)");
    c_rate->add_flag("--symmetric", symmetric);
    add_common(c_rate);

    CLI::App* c_validate = app.add_subcommand("validate", "matching + sampler gates");
    c_validate->add_option("--spec", spec_path)->required();
    c_validate->add_option("--r", r)->required();
    c_validate->add_option("--suite", suite, "quick or full");
    c_validate->add_flag("--symmetric", symmetric);
    add_common(c_validate);

    CLI::App* c_selftest = app.add_subcommand("selftest", "fast internal consistency checks");
    add_common(c_selftest);

    CLI11_PARSE(app, argc, argv);

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    try {
        if (!config_path.empty()) {
            // config file fills values the command line left at defaults; a
            // sidecar written by an earlier run works directly
            json cfg = load_json(config_path);
            if (!cfg.is_object()) throw SchemaError(config_path + ": config must be a JSON object");
            if (cfg.contains("config") && cfg.contains("config_hash")) cfg = cfg.at("config");
            if (spec_path.empty() && cfg.contains("spec")) {
                const auto& sp = cfg.at("spec");
                spec_path = sp.is_object() ? sp.dump() : sp.get<std::string>();
            }
            if (r == 0.0 && cfg.contains("r")) r = cfg.at("r").get<double>();
            if (tau == 0.0 && cfg.contains("tau")) tau = cfg.at("tau").get<double>();
            if (seed == 0 && cfg.contains("seed")) seed = cfg.at("seed").get<std::uint64_t>();
            if (nd == 100000 && cfg.contains("n")) nd = cfg.at("n").get<double>();
            if (cfg.contains("order") && order == "auto") order = cfg.at("order").get<std::string>();
            if (cfg.contains("symmetric") && !symmetric) symmetric = cfg.at("symmetric").get<bool>();
            if (cfg.contains("format") && format == "csv") format = cfg.at("format").get<std::string>();
            if (cfg.contains("baseline") && !baseline) baseline = cfg.at("baseline").get<bool>();
            if (cfg.contains("part")) part = cfg.at("part").get<std::string>();
            if (cfg.contains("threads")) threads = cfg.at("threads").get<int>();
        }

        auto emit = [&](const json& doc, const std::string& command, const json& config,
                        double throughput = 0.0) {
            const std::string text = doc.dump(2) + "\n";
            if (out_path == "-") {
                std::cout << text;
            } else {
                write_text(out_path, text);
                write_sidecar(out_path, command, config, elapsed(), throughput);
            }
        };

        if (*c_match) {
            if (spec_path.empty()) throw SchemaError("match needs --spec (flag or config)");
            if (!(r > 0.0)) throw SchemaError("match needs --r > 0 (flag or config)");
            LevyMeasure1D measure = load_measure(spec_path);
            std::string warning;
            MatchedParams mp =
                fit_from_cli(measure, r, order, p_opt, popt->count() > 0, symmetric, fallback, &warning);
            if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
            const double resid = quadrature_match_check(measure, mp);
            json doc = mp.to_json();
            doc["oracle_residual"] = resid;
            doc["measure"] = measure.to_json();
            emit(doc, "match", {{"spec", measure.to_json()}, {"r", r}, {"order", order},
                                {"symmetric", symmetric}});
            return resid < 1e-8 ? 0 : kExitGateFail;
        }

        if (*c_sample) {
            if (spec_path.empty()) throw SchemaError("sample needs --spec (flag or config)");
            if (!(r > 0.0)) throw SchemaError("sample needs --r > 0 (flag or config)");
            LevyMeasure1D measure = load_measure(spec_path);
            MatchedParams mp = params_path.empty()
                                   ? fit_from_cli(measure, r, order, 0, false, symmetric, false)
                                   : MatchedParams::from_json(load_json(params_path));
            BatchOptions bo;
            bo.master_seed = seed;
            bo.threads = threads;
            const auto n = static_cast<std::size_t>(nd);
            SampleBatch batch = baseline ? sample_normal_baseline(measure, r, n, bo, symmetric)
                                         : sample_pgn(measure, r, mp, n, bo);
            if (out_path == "-") throw SchemaError("sample needs -o FILE");
            if (format == "bin") write_binary(batch, out_path);
            else if (format == "csv") write_csv(batch, out_path);
            else throw SchemaError("format must be csv or bin");
            json config = {{"spec", measure.to_json()}, {"r", r}, {"n", n}, {"seed", seed},
                           {"order", order}, {"symmetric", symmetric},
                           {"params", mp.to_json()}, {"baseline", baseline},
                           {"format", format}, {"spec_hash", batch.spec_hash}};
            write_sidecar(out_path, "sample", config, elapsed(), n / std::max(elapsed(), 1e-9));
            return 0;
        }

        if (*c_mvmatch) {
            RadialLevySpec spec = load_radial(spec_path);
            RadialField field = radial_match(spec, tau);
            json doc = field.to_json();
            auto st = sigma_tau(field);
            std::vector<std::vector<double>> sig(st.Sigma.rows());
            for (int i = 0; i < st.Sigma.rows(); ++i)
                sig[i].assign(st.Sigma.row(i).data(), st.Sigma.row(i).data() + st.Sigma.cols());
            doc["Sigma_tau"] = sig;
            emit(doc, "mv-match", {{"spec", spec.to_json()}, {"tau", tau}});
            return 0;
        }

        if (*c_mvsample) {
            if (spec_path.empty()) throw SchemaError("mv-sample needs --spec (flag or config)");
            if (!(tau > 0.0)) throw SchemaError("mv-sample needs --tau > 0 (flag or config)");
            RadialLevySpec spec = load_radial(spec_path);
            RadialField field = radial_match(spec, tau);
            BatchOptions bo;
            bo.master_seed = seed;
            bo.threads = threads;
            const auto n = static_cast<std::size_t>(nd);
            ThinningStats stats;
            SampleBatch batch = sample_mv_batch(
                field, n, bo, part == "T" ? MvPart::TTau : MvPart::DeltaPlusTTau, &stats);
            if (out_path == "-") throw SchemaError("mv-sample needs -o FILE");
            if (format == "bin") write_binary(batch, out_path);
            else if (format == "csv") write_csv(batch, out_path);
            else throw SchemaError("format must be csv or bin");
            json config = {{"spec", spec.to_json()}, {"tau", tau}, {"n", n}, {"seed", seed},
                           {"part", part},
                           {"thinning", {{"proposed", stats.proposed},
                                         {"accepted", stats.accepted},
                                         {"max_acceptance", stats.max_acceptance}}}};
            write_sidecar(out_path, "mv-sample", config, elapsed(), n / std::max(elapsed(), 1e-9));
            return 0;
        }

        if (*c_bound) {
            LevyMeasure1D measure = load_measure(spec_path);
            if (sweep.empty()) {
                if (!(r > 0.0)) throw SchemaError("bound needs --r or --sweep");
                MatchedParams mp = fit_from_cli(measure, r, order, 0, false, symmetric, false);
                BoundReport rep = dtv_bound_1d(measure, mp);
                json doc = rep.to_json();
                doc["bound_asymptotic_q"] = dtv_bound_asymptotic(measure, mp);
                emit(doc, "bound", {{"spec", measure.to_json()}, {"r", r}, {"symmetric", symmetric}});
                return 0;
            }
            std::vector<double> rs = parse_sweep(sweep);
            std::ostringstream csv;
            std::vector<double> lx, ly, lw;
            bool header_done = false;
            for (double rv : rs) {
                MatchedParams mp = fit_from_cli(measure, rv, order, 0, false, symmetric, false);
                BoundReport rep = dtv_bound_1d(measure, mp);
                const double basy = dtv_bound_asymptotic(measure, mp);
                if (!header_done) {
                    csv << "r,bound,bound_asymptotic_q";
                    for (auto& [j, qv] : rep.Qs) csv << ",Q" << j;
                    csv << "\n";
                    header_done = true;
                }
                csv << csvnum(rv) << ',' << csvnum(rep.dtv_bound) << ',' << csvnum(basy);
                for (auto& [j, qv] : rep.Qs) csv << ',' << csvnum(qv.value);
                csv << "\n";
                lx.push_back(std::log(rv));
                ly.push_back(std::log(rate_mode == "live" ? rep.dtv_bound : basy));
                lw.push_back(1.0);
            }
            auto [slope, se] = wls_slope(lx, ly, lw);
            std::cerr << "bound sweep slope (" << rate_mode << " Q): " << slope << "\n";
            if (out_path == "-") {
                std::cout << csv.str();
            } else {
                write_text(out_path, csv.str());
                write_sidecar(out_path, "bound",
                              {{"spec", measure.to_json()}, {"sweep", sweep},
                               {"rate_mode", rate_mode}, {"slope", slope}, {"slope_se", se},
                               {"symmetric", symmetric}},
                              elapsed(), 0.0);
            }
            return 0;
        }

        if (*c_mvbound) {
            RadialLevySpec spec = load_radial(spec_path);
            RadialField field = radial_match(spec, tau);
            auto st = sigma_tau(field);
            MvBoundReport rep = mv_integral_diag(field, st.A, q_opt);
            emit(rep.to_json(), "mv-bound", {{"spec", spec.to_json()}, {"tau", tau}, {"q", q_opt}});
            return 0;
        }

        if (*c_rate) {
            LevyMeasure1D measure = load_measure(spec_path);
            RateStudyOptions opt;
            opt.n = static_cast<std::size_t>(nd);
            opt.reference_factor = reference_factor;
            opt.symmetric = symmetric;
            opt.master_seed = seed;
            opt.threads = threads;
            opt.small_parts = !full_law;
            RateStudyResult res = rate_study(measure, parse_grid(grid_str), opt);
            std::ostringstream csv;
            csv << "r,dks_pgn,se_pgn,dks_normal,se_normal\n";
            for (const auto& pt : res.points)
                csv << csvnum(pt.r) << ',' << csvnum(pt.dks_pgn) << ',' << csvnum(pt.se_pgn) << ','
                    << csvnum(pt.dks_normal) << ',' << csvnum(pt.se_normal) << "\n";
            json config = {{"spec", measure.to_json()}, {"n", opt.n}, {"seed", seed},
                           {"small_parts", opt.small_parts}, {"summary", res.to_json()}};
            if (out_path == "-") {
                std::cout << csv.str() << res.to_json().dump(2) << "\n";
            } else {
                write_text(out_path, csv.str());
                write_sidecar(out_path, "rate", config, elapsed(), 0.0);
            }
            bool ordering = true;
            for (const auto& pt : res.points) ordering = ordering && pt.dks_pgn < pt.dks_normal;
            return ordering && !res.noise_floor ? 0 : kExitGateFail;
        }

        if (*c_validate) {
            LevyMeasure1D measure = load_measure(spec_path);
            const std::size_t n = suite == "full" ? 10000000 : 1000000;
            MatchedParams mp = match_auto(measure, r, symmetric);
            const double resid = quadrature_match_check(measure, mp);
            BatchOptions bo;
            bo.master_seed = seed;
            bo.threads = threads;
            SampleBatch batch = sample_pgn(measure, r, mp, n, bo);
            auto cums = empirical_cumulants(batch.values, std::min(mp.q - 1, 6), 100);
            bool ok = resid < 1e-8;
            json jc = json::array();
            for (const auto& c : cums) {
                if (symmetric && c.order % 2 == 1) continue;
                const double target = (symmetric ? 2.0 : 1.0) *
                                      partial_cumulant(measure, c.order, measure.upper_support());
                const double z = (c.estimate - target) / c.standard_error;
                ok = ok && std::fabs(z) < 5.0;
                jc.push_back({{"order", c.order}, {"estimate", c.estimate},
                              {"se", c.standard_error}, {"target", target}, {"z", z}});
            }
            json doc = {{"oracle_residual", resid}, {"cumulants", jc}, {"pass", ok}};
            emit(doc, "validate",
                 {{"spec", measure.to_json()}, {"r", r}, {"suite", suite}, {"seed", seed}});
            return ok ? 0 : kExitGateFail;
        }

        if (*c_selftest) {
            LevyMeasure1D ts(TruncStable{1.0, 1.0, 1.0});
            MatchedParams mp = match5(ts, 1.0);
            bool ok = std::fabs(mp.p - 4.0) < 1e-12 && std::fabs(mp.s - 1.0 / 12.0) < 1e-15;
            ok = ok && quadrature_match_check(ts, mp) < 1e-9;
            BatchOptions b1, b8;
            b1.master_seed = b8.master_seed = 12345;
            b1.threads = 1;
            b8.threads = 8;
            ok = ok && sample_pgn(ts, 1.0, mp, 200000, b1).values ==
                           sample_pgn(ts, 1.0, mp, 200000, b8).values;
            ok = ok && std::fabs(stable_p_sym(1.0) - (10.0 + std::sqrt(526.0)) / 2.0) < 1e-12;
            std::cout << (ok ? "selftest: PASS\n" : "selftest: FAIL\n");
            return ok ? 0 : kExitGateFail;
        }
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const MatchInfeasible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGateFail;
    }
    return 0;
}
