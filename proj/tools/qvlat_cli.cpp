// Reproducible experiment driver: JSON config in, CSV/JSON artifacts out.
//
// Exit codes: 0 success, 1 validation error, 2 acceptance-check failure,
// 3 numerical failure. Errors go to stderr as a single JSON object.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "qvlat/engine.hpp"
#include "qvlat/errors.hpp"
#include "qvlat/hydro.hpp"
#include "qvlat/io.hpp"
#include "qvlat/models.hpp"
#include "qvlat/rwalk.hpp"

using json = nlohmann::json;
using namespace qvlat;
namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    int code;
    CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
};

models::ModelSpec parse_model(const json& j) {
    if (!j.contains("kind")) throw CliError(1, "model.kind is required");
    const std::string kind = j.at("kind").get<std::string>();
    const double rho = j.value("rho", 1.0);
    if (kind == "redistribution") {
        const std::string fam = j.value("family", "");
        if (fam == "normal")
            return models::ModelSpec::redistribution(
                nef::NefFamily::normal(j.value("sigma2", 1.0)), rho);
        if (fam == "poisson")
            return models::ModelSpec::redistribution(nef::NefFamily::poisson(), rho);
        if (fam == "gamma")
            return models::ModelSpec::redistribution(
                nef::NefFamily::gamma(j.value("shape2s", 1.0)), rho);
        if (fam == "binomial")
            return models::ModelSpec::redistribution(
                nef::NefFamily::binomial(j.value("kappa", 2)), rho);
        if (fam == "negbinomial")
            return models::ModelSpec::redistribution(
                nef::NefFamily::neg_binomial(j.value("shape2s", 1.0)), rho);
        if (fam == "ghs")
            return models::ModelSpec::redistribution(nef::NefFamily::ghs(j.value("r", 1.0)),
                                                     rho);
        throw CliError(1, "unknown redistribution family '" + fam + "'");
    }
    if (kind == "irw") return models::ModelSpec::irw(rho);
    if (kind == "pep") return models::ModelSpec::pep(j.value("kappa", 2), rho);
    if (kind == "sip") return models::ModelSpec::sip(j.value("shape2s", 1.0), rho);
    if (kind == "harmonic")
        return models::ModelSpec::harmonic(j.value("shape2s", 1.0), rho);
    if (kind == "gl")
        return models::ModelSpec::ginzburg_landau(j.value("sigma2", 1.0), rho);
    throw CliError(1, "unknown model kind '" + kind + "'");
}

// profile spec validated against the family mean domain with a 5% margin
std::function<double(double)> parse_profile(const json& j, const models::ModelSpec& m) {
    const std::string type = j.value("type", "constant");
    auto domain_check = [&](double lo, double hi) {
        const auto& fam = m.invariant_family();
        double dlo = -1e300, dhi = 1e300;
        switch (fam.support()) {
            case nef::Support::HalfLine:
            case nef::Support::Naturals: dlo = 0.0; break;
            case nef::Support::Range0K:
                dlo = 0.0;
                dhi = fam.kappa;
                break;
            default: break;
        }
        const double margin = 0.05 * (dhi < 1e300 ? dhi - dlo : std::max(1.0, hi - lo));
        if ((dlo > -1e300 && lo < dlo + margin) || (dhi < 1e300 && hi > dhi - margin))
            throw CliError(1, "profile leaves the family mean domain (5% margin)");
    };
    if (type == "constant") {
        const double mean = j.value("mean", m.rho());
        domain_check(mean, mean);
        return [mean](double) { return mean; };
    }
    if (type == "cosine") {
        const double mean = j.value("mean", m.rho());
        const double amp = j.value("amplitude", 1.0);
        const int freq = j.value("frequency", 1);
        domain_check(mean - std::abs(amp), mean + std::abs(amp));
        return [mean, amp, freq](double u) {
            return mean + amp * std::cos(2.0 * M_PI * freq * u);
        };
    }
    if (type == "step") {
        const double lo = j.value("left", 1.0);
        const double hi = j.value("right", 2.0);
        domain_check(std::min(lo, hi), std::max(lo, hi));
        return [lo, hi](double u) { return u < 0.5 ? lo : hi; };
    }
    throw CliError(1, "unknown profile type '" + type + "'");
}

json coefficient_report(const models::ModelSpec& m) {
    const auto qc = models::extract_quadratic_coeffs(m);
    const auto triple = models::qvf_from_coeffs(qc);
    json j;
    j["model"] = m.name();
    json params;
    params["rho"] = m.rho();
    switch (m.kind()) {
        case models::Kind::Redistribution: {
            const auto& f = m.invariant_family();
            params["family"] = f.name();
            if (f.tag == nef::Family::Normal) params["sigma2"] = f.sigma2;
            if (f.tag == nef::Family::Gamma || f.tag == nef::Family::NegBinomial)
                params["shape2s"] = f.shape2s;
            if (f.tag == nef::Family::Binomial) params["kappa"] = f.kappa;
            if (f.tag == nef::Family::GHS) params["r"] = f.r;
            break;
        }
        case models::Kind::PEP: params["kappa"] = m.kappa(); break;
        case models::Kind::SIP:
        case models::Kind::Harmonic: params["shape2s"] = m.shape2s(); break;
        case models::Kind::GinzburgLandau: params["sigma2"] = m.sigma2(); break;
        default: break;
    }
    j["params"] = params;
    j["p"] = qc.p;
    j["q"] = qc.q;
    j["r"] = qc.r;
    j["D"] = qc.D;
    j["a"] = qc.a;
    j["b"] = qc.b;
    j["c"] = qc.c;
    j["d"] = qc.d;
    j["residual"] = qc.residual;
    j["v2"] = triple.v2;
    j["v1"] = triple.v1;
    j["v0"] = triple.v0;
    return j;
}

int cmd_classify(const json& cfg, const fs::path& out, const std::string& meta,
                 bool check) {
    const auto m = parse_model(cfg.at("model"));
    auto rep = coefficient_report(m);
    rep["_meta"] = meta;
    std::ofstream of(out / ("classify_" + m.name() + ".json"));
    of << rep.dump(2) << "\n";
    std::cout << rep.dump(2) << "\n";
    if (check) {
        const auto want = nef::family_triple(m.invariant_family());
        const double tol = m.exact_arithmetic() ? 1e-8 : 1e-6;
        if (std::abs(rep["v2"].get<double>() - want.v2) > tol ||
            std::abs(rep["v1"].get<double>() - want.v1) > tol ||
            std::abs(rep["v0"].get<double>() - want.v0) > tol)
            throw CliError(2, m.name() + ": extracted triple does not match the family");
    }
    return 0;
}

int cmd_verify(const json& cfg, const fs::path& out, const std::string& meta, bool check) {
    const auto m = parse_model(cfg.at("model"));
    const auto rep = models::verify_assumptions(m);
    json j;
    j["model"] = m.name();
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"magnitude", c.magnitude},
                          {"tolerance", c.tolerance},
                          {"pass", c.pass}});
    j["assumptions"] = checks;
    bool all = rep.all_pass();

    if (m.discrete_states()) {
        const int N = cfg.value("N", 3);
        const long long M = cfg.value("M", 4);
        const double resid = engine::exact_stationarity_residual(m, N, M);
        j["stationarity_residual"] = resid;
        j["stationarity_N"] = N;
        j["stationarity_M"] = M;
        if (resid > 1e-12) all = false;

        if (cfg.value("export_generator", false)) {
            // coordinate-list sparse export, diagonal included
            const auto fiber = engine::enumerate_fiber(m, N, M);
            const auto gen = engine::exact_generator(m, fiber);
            io::CsvWriter gcsv((out / "generator.csv").string(), meta,
                               {"row", "col", "rate"});
            for (long long row = 0; row < gen.n; ++row) {
                gcsv.row({std::to_string(row), std::to_string(row),
                          io::format_double(gen.diag[row])});
                for (const auto& [col, rate] : gen.rows[row])
                    gcsv.row({std::to_string(row), std::to_string(col),
                              io::format_double(rate)});
            }
        }
    }
    j["pass"] = all;
    j["_meta"] = meta;
    std::ofstream of(out / ("verify_" + m.name() + ".json"));
    of << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    if (check && !all) throw CliError(2, m.name() + ": assumption verification failed");
    return 0;
}

int cmd_simulate(const json& cfg, const fs::path& out, const std::string& meta, int) {
    const auto m = parse_model(cfg.at("model"));
    const int N = cfg.value("Ns", std::vector<int>{32}).front();
    const auto times = cfg.value("times", std::vector<double>{cfg.value("T", 0.1)});
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    Rng rng(seed);
    auto profile = parse_profile(cfg.value("profile", json{{"type", "constant"}}), m);
    auto c = engine::init_product_profile(m, profile, N, rng);

    struct Recorder : engine::TrajectoryObserver {
        std::vector<std::pair<double, std::vector<double>>> snaps;
        void snapshot(double t, const engine::Configuration& cfg) override {
            snaps.emplace_back(t, cfg.eta);
        }
    } rec;
    rec.times = times;
    engine::simulate(m, c, times.back(), rng, &rec);

    io::CsvWriter csv((out / "trajectory.csv").string(), meta, {"t", "x", "eta"});
    for (const auto& [t, eta] : rec.snaps)
        for (int x = 0; x < N; ++x)
            csv.row({io::format_double(t), std::to_string(x), io::format_double(eta[x])});
    return 0;
}

int cmd_hydro(const json& cfg, const fs::path& out, const std::string& meta, int threads,
              bool check) {
    const auto m = parse_model(cfg.at("model"));
    const auto Ns = cfg.value("Ns", std::vector<int>{32, 64});
    const auto times = cfg.value("times", std::vector<double>{0.1, 0.2});
    const int replicas = cfg.value("replicas", 400);
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    auto profile = parse_profile(cfg.value("profile", json{{"type", "cosine"}}), m);

    auto res =
        hydro::hydro_convergence_experiment(m, profile, Ns, times, replicas, seed, threads);

    io::CsvWriter csv((out / "profile.csv").string(), meta,
                      {"model", "N", "t", "x", "mean", "se", "reference"});
    for (std::size_t ni = 0; ni < Ns.size(); ++ni) {
        const auto& p = res.profiles[ni];
        for (std::size_t t = 0; t < times.size(); ++t)
            for (int x = 0; x < Ns[ni]; ++x)
                csv.row({res.model, std::to_string(Ns[ni]), io::format_double(times[t]),
                         std::to_string(x), io::format_double(p.mean[t][x]),
                         io::format_double(p.se[t][x]),
                         io::format_double(p.reference[t][x])});
    }
    // martingale / quadratic-variation table against h_1
    {
        io::CsvWriter mcsv((out / "martingale.csv").string(), meta,
                           {"model", "N", "t", "G", "var_M", "mean_int_qv", "se"});
        const int mart_replicas = std::min(replicas, 400);
        for (int N : Ns) {
            const auto tf = hydro::make_test_function(N, [](double u) {
                return std::sqrt(2.0) * std::cos(2.0 * M_PI * u);
            });
            const auto ens = hydro::run_martingale(m, N, profile, tf, times,
                                                   mart_replicas, seed ^ 0xabcdef12ull,
                                                   threads);
            res.martingale.push_back(hydro::martingale_stats(ens));
            const auto& st = res.martingale.back();
            for (std::size_t t = 0; t < times.size(); ++t)
                mcsv.row({res.model, std::to_string(N), io::format_double(times[t]), "h1",
                          io::format_double(st.var_M[t]),
                          io::format_double(st.mean_int_qv[t]),
                          io::format_double(st.se_var_M[t])});
        }
    }

    double worst_z = 0.0;
    for (const auto& p : res.profiles) worst_z = std::max(worst_z, p.max_abs_z);
    std::cout << "max |mean - reference| / SE over all (N,t,x): " << worst_z << "\n";
    if (check && worst_z > 4.0)
        throw CliError(2, "profile deviates from the heat solution beyond 4 SE");
    return 0;
}

int cmd_correlations(const json& cfg, const fs::path& out, const std::string& meta,
                     int threads, bool check) {
    const auto m = parse_model(cfg.at("model"));
    const int N = cfg.value("Ns", std::vector<int>{16}).front();
    const auto times = cfg.value("times", std::vector<double>{0.05, 0.1});
    const int replicas = cfg.value("replicas", 2000);
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    auto profile = parse_profile(cfg.value("profile", json{{"type", "constant"}}), m);

    const auto qc = models::extract_quadratic_coeffs(m);
    const auto triple = models::qvf_from_coeffs(qc);
    const auto snaps = hydro::run_snapshots(m, N, profile, times, replicas, seed, threads);
    std::vector<double> rho0(N);
    for (int x = 0; x < N; ++x) rho0[x] = profile(static_cast<double>(x) / N);
    const auto tr = hydro::phi_estimate(snaps, rho0, qc, triple, seed ^ 0x9e3779b9ull);

    io::CsvWriter csv((out / "phi.csv").string(), meta,
                      {"model", "N", "t", "i", "phi", "se"});
    for (std::size_t t = 0; t < tr.times.size(); ++t)
        for (std::size_t i = 0; i < tr.lags.size(); ++i)
            csv.row({m.name(), std::to_string(N), io::format_double(tr.times[t]),
                     std::to_string(tr.lags[i]), io::format_double(tr.phi[t][i]),
                     io::format_double(tr.se[t][i])});

    // deterministic Duhamel integration of the same correlation system
    const auto walk = rwalk::build_walk(N, qc.D, qc.a, triple.v2);
    hydro::GradNormSource src(rho0, qc.D);
    std::vector<double> phi0(walk.K + 1, 0.0);
    const auto ode = rwalk::phi_ode(walk, phi0, src, times);
    io::CsvWriter ocsv((out / "phi_ode.csv").string(), meta, {"N", "t", "i", "phi"});
    double worst_z = 0.0;
    for (std::size_t t = 0; t < times.size(); ++t)
        for (int i = 0; i <= walk.K; ++i) {
            ocsv.row({std::to_string(N), io::format_double(times[t]), std::to_string(i),
                      io::format_double(ode[t][i])});
            if (tr.se[t][i] > 0.0)
                worst_z =
                    std::max(worst_z, std::abs(tr.phi[t][i] - ode[t][i]) / tr.se[t][i]);
        }
    std::cout << "max |phi_mc - phi_ode| / SE: " << worst_z << "\n";
    if (check && worst_z > 4.0)
        throw CliError(2, "Monte Carlo correlations deviate from the Duhamel solution");
    return 0;
}

int cmd_walk(const json& cfg, const fs::path& out, const std::string& meta, bool check) {
    const auto m = parse_model(cfg.at("model"));
    const auto qc = models::extract_quadratic_coeffs(m);
    const auto triple = models::qvf_from_coeffs(qc);
    const auto Ns = cfg.value("Ns", std::vector<int>{8, 16, 32, 64});
    const double t = cfg.value("T", 1.0);

    io::CsvWriter csv((out / "walk.csv").string(), meta,
                      {"N", "D", "a", "v2", "i", "t", "occupation_time"});
    for (int N : Ns) {
        const auto spec = rwalk::build_walk(N, qc.D, qc.a, triple.v2);
        const auto occ = rwalk::occupation_time_all(spec, t);
        for (int i = 0; i <= spec.K; ++i)
            csv.row({std::to_string(N), io::format_double(qc.D), io::format_double(qc.a),
                     io::format_double(triple.v2), std::to_string(i),
                     io::format_double(t), io::format_double(occ[i])});
    }
    const auto rep = rwalk::verify_scaling(qc.D, qc.a, triple.v2, Ns, t);
    std::cout << "log-log slope of max occupation vs N: " << rep.slope
              << (rep.pass ? " (pass)" : " (fail)") << "\n";
    if (check && !rep.pass) throw CliError(2, "local-time scaling outside [-1.15,-0.85]");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conservative lattice dynamics laboratory"};
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    bool check = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (default: from config or '.')");
    app.add_option("--threads", threads, "worker threads (speed only)");
    app.add_flag("--check", check, "run acceptance assertions; exit 2 on failure");
    CLI11_PARSE(app, argc, argv);

    json cfg;
    try {
        std::ifstream in(config_path);
        if (!in) throw CliError(1, "cannot open config " + config_path);
        in >> cfg;
    } catch (const json::exception& e) {
        std::cerr << json{{"error", "config parse failure"}, {"detail", e.what()}}.dump()
                  << "\n";
        return 1;
    } catch (const CliError& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }

    try {
        if (!cfg.contains("command")) throw CliError(1, "config must name a command");
        if (!cfg.contains("seed")) throw CliError(1, "config must carry an explicit seed");
        const fs::path out =
            out_dir.empty() ? fs::path(cfg.value("out", ".")) : fs::path(out_dir);
        fs::create_directories(out);
        const auto meta = io::metadata_line(io::fnv1a64(cfg.dump()));
        const std::string command = cfg.at("command").get<std::string>();

        if (command == "classify") return cmd_classify(cfg, out, meta, check);
        if (command == "verify") return cmd_verify(cfg, out, meta, check);
        if (command == "simulate") return cmd_simulate(cfg, out, meta, threads);
        if (command == "hydro") return cmd_hydro(cfg, out, meta, threads, check);
        if (command == "correlations")
            return cmd_correlations(cfg, out, meta, threads, check);
        if (command == "walk") return cmd_walk(cfg, out, meta, check);
        throw CliError(1, "unknown command '" + command + "'");
    } catch (const CliError& e) {
        std::cerr << json{{"error", e.what()}, {"code", e.code}}.dump() << "\n";
        return e.code;
    } catch (const DomainError& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "domain"}}.dump() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "config"}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "numerical"}}.dump() << "\n";
        return 3;
    }
}
