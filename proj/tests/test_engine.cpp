#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qvlat/engine.hpp"
#include "qvlat/errors.hpp"
#include "qvlat/hydro.hpp"

using namespace qvlat;
using engine::Configuration;
using models::ModelSpec;
using nef::NefFamily;

TEST_CASE("product initialization: support, CLT band, cosine profile") {
    Rng rng(404u);
    const auto bin = ModelSpec::redistribution(NefFamily::binomial(2), 1.0);
    const auto cfg = engine::init_product(bin, 1.0, 8, rng);
    for (double v : cfg.eta) {
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
        CHECK(v == std::floor(v));
    }

    const auto pois = ModelSpec::redistribution(NefFamily::poisson(), 2.0);
    const int N = 4096;
    const auto big = engine::init_product(pois, 2.0, N, rng);
    const double mean = big.total / N;
    CHECK(std::abs(mean - 2.0) < 4.0 * std::sqrt(2.0 / N));

    // cosine profile: bin the sites and compare local means
    auto profile = [](double u) { return 2.0 + std::cos(2.0 * M_PI * u); };
    const auto prof = engine::init_product_profile(pois, profile, N, rng);
    for (int block = 0; block < 8; ++block) {
        double acc = 0.0, ref = 0.0;
        for (int x = block * N / 8; x < (block + 1) * N / 8; ++x) {
            acc += prof.eta[x];
            ref += profile(static_cast<double>(x) / N);
        }
        const double cnt = N / 8.0;
        CHECK(std::abs(acc / cnt - ref / cnt) < 4.0 * std::sqrt(3.0 / cnt));
    }
}

TEST_CASE("T = 0 leaves the configuration untouched") {
    Rng rng(7u);
    const auto m = ModelSpec::sip(1.0, 2.0);
    auto cfg = engine::init_product(m, 2.0, 16, rng);
    const auto before = cfg.eta;
    engine::simulate(m, cfg, 0.0, rng);
    CHECK(cfg.eta == before);
}

TEST_CASE("conservation and support preservation over many events") {
    Rng rng(8u);
    for (const auto& m :
         {ModelSpec::redistribution(NefFamily::poisson(), 2.0),
          ModelSpec::redistribution(NefFamily::binomial(2), 1.0),
          ModelSpec::redistribution(NefFamily::neg_binomial(1.0), 2.0),
          ModelSpec::irw(2.0), ModelSpec::pep(2, 1.0), ModelSpec::sip(1.0, 2.0),
          ModelSpec::harmonic(1.0, 2.0)}) {
        CAPTURE(m.name());
        // a million-event run for the first model, shorter for the rest
        const double T = m.invariant_family().tag == nef::Family::Poisson &&
                                 m.kind() == models::Kind::Redistribution
                             ? 30.0
                             : 1.0;
        auto cfg = engine::init_product(m, m.rho(), 32, rng);
        const double total0 = cfg.total;
        engine::simulate(m, cfg, T, rng);
        CHECK(cfg.total == total0);  // discrete: exact conservation
        for (double v : cfg.eta) {
            CHECK(v >= 0.0);
            CHECK(v == std::floor(v));
            if (m.kind() == models::Kind::PEP) CHECK(v <= m.kappa());
        }
    }

    // continuous families: conserved up to accumulated roundoff
    for (const auto& m : {ModelSpec::redistribution(NefFamily::gamma(1.0), 2.0),
                          ModelSpec::redistribution(NefFamily::normal(1.0), 0.0),
                          ModelSpec::redistribution(NefFamily::ghs(1.0), 0.0)}) {
        CAPTURE(m.name());
        auto cfg = engine::init_product(m, m.rho(), 16, rng);
        const double total0 = cfg.total;
        engine::simulate(m, cfg, 0.5, rng);
        CHECK(std::abs(cfg.total - total0) < 1e-9 * 16);
        if (m.invariant_family().tag == nef::Family::Gamma)
            for (double v : cfg.eta) CHECK(v >= 0.0);
    }
}

TEST_CASE("determinism: same seed, same trajectory") {
    const auto m = ModelSpec::sip(1.0, 2.0);
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed, 3);
        auto cfg = engine::init_product(m, 2.0, 24, rng);
        engine::simulate(m, cfg, 0.3, rng);
        return cfg.eta;
    };
    CHECK(run(42) == run(42));
    CHECK(run(42) != run(43));
}

TEST_CASE("event-count sanity for the redistribution clock") {
    // each bond carries a rate-1 clock: expected events = N * tau
    const auto m = ModelSpec::redistribution(NefFamily::poisson(), 2.0);
    struct Counter : engine::TrajectoryObserver {
        long long events = 0;
        void transition(const Configuration&, int, double, double, double, double) override {
            ++events;
        }
    } counter;
    Rng rng(5u);
    auto cfg = engine::init_product(m, 2.0, 32, rng);
    const double T = 0.5;
    engine::simulate(m, cfg, T, rng, &counter);
    const double expected = 32.0 * 32.0 * 32.0 * T;
    CHECK(std::abs(counter.events - expected) < 0.05 * expected);
}

TEST_CASE("fiber enumeration sizes") {
    const auto bin = ModelSpec::redistribution(NefFamily::binomial(2), 1.0);
    CHECK(engine::enumerate_fiber(bin, 3, 2).states.size() == 6);
    const auto irw = ModelSpec::irw(1.0);
    CHECK(engine::enumerate_fiber(irw, 3, 3).states.size() == 10);  // C(5,2)
    CHECK_THROWS_AS(engine::enumerate_fiber(irw, 12, 24, 1000), FiberTooLarge);
}

TEST_CASE("exact generator: rows sum to zero and diagonal matches exit rates") {
    const auto m = ModelSpec::redistribution(NefFamily::poisson(), 1.0);
    const auto fiber = engine::enumerate_fiber(m, 3, 4);
    const auto gen = engine::exact_generator(m, fiber);
    for (long long i = 0; i < gen.n; ++i) {
        double row = gen.diag[i];
        for (const auto& [j, rate] : gen.rows[i]) {
            CHECK(rate >= 0.0);
            row += rate;
        }
        CHECK(std::abs(row) < 1e-12);
    }
    // independent exit-rate computation: each bond leaves with prob 1 - P(beta = e0)
    const auto& k = m.kernel();
    for (long long i = 0; i < gen.n; ++i) {
        const auto& st = fiber.states[i];
        double exit = 0.0;
        for (int x = 0; x < 3; ++x) {
            const int y = (x + 1) % 3;
            exit += 1.0 - k.density(st[x], st[y], 0.0);
        }
        CHECK(gen.diag[i] == doctest::Approx(-exit).epsilon(1e-12));
    }
}

TEST_CASE("exact stationarity of the canonical measure") {
    CHECK(engine::exact_stationarity_residual(
              ModelSpec::redistribution(NefFamily::poisson(), 1.0), 3, 4) < 1e-12);
    CHECK(engine::exact_stationarity_residual(ModelSpec::sip(1.0, 1.0), 3, 3) < 1e-12);
    CHECK(engine::exact_stationarity_residual(ModelSpec::harmonic(1.0, 1.0), 3, 3) <
          1e-12);
}

TEST_CASE("exact expectation evolution: conservation and series expansion") {
    const auto m = ModelSpec::redistribution(NefFamily::poisson(), 1.0);
    const auto fiber = engine::enumerate_fiber(m, 3, 4);
    const auto gen = engine::exact_generator(m, fiber);

    // start from a fixed state
    std::vector<int> start = {4, 0, 0};
    const auto idx = fiber.index_of(start);
    REQUIRE(idx >= 0);
    std::vector<double> mu0(fiber.states.size(), 0.0);
    mu0[static_cast<std::size_t>(idx)] = 1.0;

    auto total = [](const std::vector<int>& s) {
        double acc = 0.0;
        for (int v : s) acc += v;
        return acc;
    };
    for (double t : {0.1, 1.0, 7.0})
        CHECK(engine::exact_expectation_evolution(gen, fiber, mu0, total, t) ==
              doctest::Approx(4.0).epsilon(1e-12));

    // stationary distribution: E[eta_0] is constant in time
    const auto nu = engine::canonical_weights(m, fiber);
    auto site0 = [](const std::vector<int>& s) { return static_cast<double>(s[0]); };
    const double e0 = engine::exact_expectation_evolution(gen, fiber, nu, site0, 0.0);
    for (double t : {0.5, 3.0})
        CHECK(engine::exact_expectation_evolution(gen, fiber, nu, site0, t) ==
              doctest::Approx(e0).epsilon(1e-12));

    // first-order expansion of E[f(eta(t))] for f = eta_0 eta_1
    auto f01 = [](const std::vector<int>& s) {
        return static_cast<double>(s[0]) * static_cast<double>(s[1]);
    };
    std::vector<double> lf(fiber.states.size(), 0.0);
    for (std::size_t i = 0; i < fiber.states.size(); ++i) {
        lf[i] = gen.diag[i] * f01(fiber.states[i]);
        for (const auto& [j, rate] : gen.rows[i]) lf[i] += rate * f01(fiber.states[j]);
    }
    const double t = 1e-3;
    const double got = engine::exact_expectation_evolution(gen, fiber, mu0, f01, t);
    const double first_order = f01(start) + t * lf[static_cast<std::size_t>(idx)];
    CHECK(std::abs(got - first_order) < 50.0 * t * t);
}

TEST_CASE("simulated stationary mean stays flat (Gamma redistribution)") {
    const auto m = ModelSpec::redistribution(NefFamily::gamma(1.0), 2.0);
    const int N = 64;
    const int R = 200;
    oracle::RunningStats drift;
    for (int r = 0; r < R; ++r) {
        Rng rng(2024u, static_cast<std::uint64_t>(r));
        auto cfg = engine::init_product(m, 2.0, N, rng);
        const double before = cfg.total / N;
        engine::simulate(m, cfg, 0.1, rng);
        drift.push(cfg.total / N - before);
    }
    CHECK(std::abs(drift.mean) < 4.0 * drift.se_mean() + 1e-12);
}

TEST_CASE("GHS redistribution preserves its stationary law under the dynamics") {
    // exercises the conditional table sampler: if the bond kernel were off,
    // the marginal mean or variance would drift away from the product law
    const double r_shape = 1.0, rho = 1.0;
    const auto m = ModelSpec::redistribution(NefFamily::ghs(r_shape), rho);
    const int N = 32, R = 300;
    oracle::RunningStats mean_after, var_after;
    for (int r = 0; r < R; ++r) {
        Rng rng(31337u, static_cast<std::uint64_t>(r));
        auto cfg = engine::init_product(m, rho, N, rng);
        engine::simulate(m, cfg, 0.05, rng);
        double s = 0.0, s2 = 0.0;
        for (double v : cfg.eta) {
            s += v;
            s2 += v * v;
        }
        mean_after.push(s / N);
        var_after.push(s2 / N - (s / N) * (s / N));
    }
    const double v_rho = rho * rho / r_shape + r_shape;  // = 2
    CHECK(std::abs(mean_after.mean - rho) < 4.0 * mean_after.se_mean());
    // per-replica sample variance has a small O(1/N) bias; allow it on top
    CHECK(std::abs(var_after.mean - v_rho) < 4.0 * var_after.se_mean() + v_rho / N);
}

TEST_CASE("GHS redistribution mean profile follows the heat flow") {
    const auto m = ModelSpec::redistribution(NefFamily::ghs(1.0), 0.0);
    auto cosine = [](double u) { return std::cos(2.0 * M_PI * u); };
    const auto snaps = hydro::run_snapshots(m, 32, cosine, {0.05}, 300, 2718u);
    std::vector<double> rho0(32);
    for (int x = 0; x < 32; ++x) rho0[x] = cosine(x / 32.0);
    const auto st = hydro::profile_stats(snaps, rho0, 0.5);
    CHECK(st.max_abs_z < 4.0);
}

TEST_CASE("Ginzburg-Landau: conservation, stationarity, Richardson step halving") {
    const auto m = ModelSpec::ginzburg_landau(1.0, 0.5);
    const int N = 16;
    const int R = 400;
    auto run_with_step = [&](double dt, std::uint64_t seed) {
        oracle::RunningStats drift, site0;
        for (int r = 0; r < R; ++r) {
            Rng rng(seed, static_cast<std::uint64_t>(r));
            auto cfg = engine::init_product(m, 0.5, N, rng);
            const double before = cfg.total;
            engine::SimulateOptions opt;
            opt.gl_dt_micro = dt;
            engine::simulate(m, cfg, 0.05, rng, nullptr, opt);
            CHECK(std::abs(cfg.total - before) < 1e-8 * N);
            drift.push(cfg.total / N - before / N);
            site0.push(cfg.eta[0]);
        }
        return std::pair{drift, site0};
    };
    const auto [drift1, site1] = run_with_step(0.05, 11u);
    CHECK(std::abs(drift1.mean) < 4.0 * drift1.se_mean() + 1e-12);
    // stationary marginal: site mean stays at rho
    CHECK(std::abs(site1.mean - 0.5) < 4.0 * site1.se_mean());
    // Richardson guard: half step gives the same ensemble statistics
    const auto [drift2, site2] = run_with_step(0.025, 12u);
    CHECK(std::abs(site1.mean - site2.mean) <
          4.0 * std::hypot(site1.se_mean(), site2.se_mean()));

    // cosine start relaxes along the heat flow with D = 1/(2 sigma2)
    auto cosine = [](double u) { return 0.5 + std::cos(2.0 * M_PI * u); };
    const auto snaps = hydro::run_snapshots(m, N, cosine, {0.05}, 300, 13u);
    std::vector<double> rho0(N);
    for (int x = 0; x < N; ++x) rho0[x] = cosine(static_cast<double>(x) / N);
    const auto st = hydro::profile_stats(snaps, rho0, 0.5);
    CHECK(st.max_abs_z < 4.0);
}

TEST_CASE("mean profile solves the discrete heat equation (small fiber oracle)") {
    // ensemble mean from simulation vs exact discrete heat solution
    const auto m = ModelSpec::redistribution(NefFamily::poisson(), 2.0);
    const int N = 6;
    std::vector<double> eta0 = {4, 3, 1, 0, 1, 3};
    std::vector<double> rho0 = eta0;
    const double t = 0.05;
    const auto ref = hydro::discrete_heat(rho0, 0.5, t);

    const int R = 4000;
    std::vector<oracle::RunningStats> site(N);
    for (int r = 0; r < R; ++r) {
        Rng rng(99u, static_cast<std::uint64_t>(r));
        Configuration cfg;
        cfg.N = N;
        cfg.eta = eta0;
        cfg.total = cfg.recompute_total();
        engine::simulate(m, cfg, t, rng);
        for (int x = 0; x < N; ++x) site[x].push(cfg.eta[x]);
    }
    for (int x = 0; x < N; ++x)
        CHECK(std::abs(site[x].mean - ref[x]) < 4.0 * site[x].se_mean());
}
