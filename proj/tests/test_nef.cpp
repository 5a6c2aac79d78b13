#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qvlat/errors.hpp"
#include "qvlat/ghs.hpp"
#include "qvlat/nef.hpp"
#include "qvlat/quadrature.hpp"
#include "qvlat/rng.hpp"

using namespace qvlat;
using nef::Family;
using nef::NefFamily;

TEST_CASE("complex log-gamma agrees with the infinite-product oracle") {
    // covers both the Lanczos branch (|Im| <= 20) and the Stirling branch
    for (double r : {0.5, 1.0, 2.0, 3.7}) {
        for (double x : {0.0, 0.3, 1.0, 5.0, 15.0, 25.0, 45.0, 60.0, 120.0}) {
            const double got = ghs::log_abs_gamma_sq(r, x);
            const double want = oracle::log_abs_gamma_sq_product(r, x);
            CHECK(got == doctest::Approx(want).epsilon(1e-11));
        }
    }
    // |Gamma(1/2 + i y)|^2 = pi / cosh(pi y)
    for (double y : {0.0, 0.7, 3.0, 12.0}) {
        const double got = ghs::log_abs_gamma_sq(1.0, 2.0 * y);
        const double want = std::log(M_PI) - std::log(std::cosh(M_PI * y));
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("density point values") {
    // GHS r=1, theta=0 reduces to (1/2) sech(pi x / 2); at 0 this is 1/2
    const auto ghs1 = nef::make_nef(NefFamily::ghs(1.0), 0.0);
    CHECK(nef::density(ghs1, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(nef::density(ghs1, 1.3) ==
          doctest::Approx(0.5 / std::cosh(M_PI * 1.3 / 2.0)).epsilon(1e-12));

    const auto pois = nef::make_nef(NefFamily::poisson(), 1.0);
    CHECK(nef::density(pois, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

    const auto norm = nef::make_nef(NefFamily::normal(1.0), 0.0);
    CHECK(nef::density(norm, 0.0) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("make_nef validates the mean domain") {
    CHECK_THROWS_AS(nef::make_nef(NefFamily::binomial(3), 3.5), DomainError);
    CHECK_THROWS_AS(nef::make_nef(NefFamily::binomial(3), 0.0), DomainError);
    CHECK_THROWS_AS(nef::make_nef(NefFamily::binomial(3), 3.0), DomainError);
    CHECK_THROWS_AS(nef::make_nef(NefFamily::gamma(1.0), -0.5), DomainError);
    CHECK_THROWS_AS(nef::make_nef(NefFamily::poisson(), 0.0), DomainError);
    CHECK_THROWS_AS(NefFamily::normal(0.0), DomainError);
    CHECK_THROWS_AS(NefFamily::binomial(0), DomainError);
    CHECK(nef::make_nef(NefFamily::ghs(1.0), 0.0).theta == doctest::Approx(0.0));
    const auto d = nef::make_nef(NefFamily::normal(1.0), 0.0);
    CHECK(nef::moments(d).variance == doctest::Approx(1.0));
}

TEST_CASE("moments match the family variance functions") {
    const auto g2 = nef::make_nef(NefFamily::ghs(2.0), 2.0);
    CHECK(g2.theta == doctest::Approx(M_PI / 4.0));
    CHECK(nef::moments(g2).mean == doctest::Approx(2.0));
    CHECK(nef::moments(g2).variance == doctest::Approx(4.0));  // r tan^2 + r

    const auto b4 = nef::make_nef(NefFamily::binomial(4), 1.0);
    CHECK(nef::moments(b4).variance == doctest::Approx(0.75));

    const auto ga = nef::make_nef(NefFamily::gamma(1.0), 2.0);
    CHECK(nef::moments(ga).variance == doctest::Approx(4.0));
}

TEST_CASE("normalization and quadrature moments across families") {
    std::vector<std::pair<NefFamily, std::vector<double>>> cases = {
        {NefFamily::normal(1.5), {-1.0, 0.5, 2.0}},
        {NefFamily::poisson(), {0.5, 1.0, 3.0}},
        {NefFamily::gamma(1.0), {0.5, 2.0}},
        {NefFamily::gamma(2.5), {1.0, 3.0}},
        {NefFamily::binomial(3), {0.5, 1.5, 2.5}},
        {NefFamily::neg_binomial(1.0), {0.5, 2.0}},
        {NefFamily::ghs(0.5), {-1.0, 0.0, 2.0}},
        {NefFamily::ghs(2.0), {0.0, 3.0}},
    };
    for (const auto& [fam, rhos] : cases) {
        for (double rho : rhos) {
            const auto d = nef::make_nef(fam, rho);
            double total;
            if (fam.discrete()) {
                total = 0.0;
                const int hi = fam.tag == Family::Binomial
                                   ? fam.kappa
                                   : static_cast<int>(rho + 60.0 * std::sqrt(rho) + 60.0);
                for (int k = 0; k <= hi; ++k) total += nef::density(d, k);
            } else if (fam.tag == Family::Gamma) {
                total = integrate_half_line([&](double x) { return nef::density(d, x); },
                                            0.0, rho + 3.0, 1e-10);
            } else {
                total = integrate_real_line([&](double x) { return nef::density(d, x); },
                                            rho, nef::integration_scale(d), 1e-10);
            }
            CHECK(std::abs(total - 1.0) < 1e-8);
            CHECK(nef::raw_moment(d, 1) == doctest::Approx(rho).epsilon(1e-6));
            const double m2 = nef::raw_moment(d, 2);
            CHECK(m2 - rho * rho ==
                  doctest::Approx(nef::moments(d).variance).epsilon(1e-6));
        }
    }
}

TEST_CASE("GHS mgf closed form, pole, and quadrature cross-check") {
    CHECK(nef::ghs_mgf(0.7, 0.3, 0.0) == doctest::Approx(1.0));
    CHECK(nef::ghs_mgf(1.0, 0.0, M_PI / 4.0) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(nef::ghs_mgf(2.0, 0.0, M_PI / 3.0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_THROWS_AS(nef::ghs_mgf(1.0, 0.2, M_PI / 2.0 - 0.2), DomainError);
    CHECK_THROWS_AS(nef::ghs_mgf(1.0, 0.0, 2.0), DomainError);

    for (const auto& [r, theta, t] :
         std::vector<std::tuple<double, double, double>>{
             {1.0, 0.0, 0.5}, {2.0, 0.4, -0.6}, {0.5, -0.3, 0.7}}) {
        const double closed = nef::ghs_mgf(r, theta, t);
        // e^{tx} p_{r,theta} is proportional to p_{r,theta+t}
        const double te = theta + t;
        const double sd = std::sqrt(r * std::tan(te) * std::tan(te) + r);
        const double scale = std::max(4.0 * sd + 4.0, 8.0 / (0.5 * M_PI - std::abs(te)));
        const double quad = integrate_real_line(
            [&, r = r, theta = theta, t = t](double x) {
                return std::exp(t * x) * ghs::density(r, theta, x);
            },
            r * std::tan(te), scale, 1e-11);
        CHECK(closed == doctest::Approx(quad).epsilon(1e-6));
    }
}

TEST_CASE("GHS convolution identity p_r * p_r = p_2r") {
    for (double r : {0.5, 1.0, 2.0}) {
        for (int k = 0; k < 20; ++k) {
            const double s = -4.0 + 8.0 * k / 19.0;
            const double conv = integrate_real_line(
                [&](double u) {
                    return ghs::density(r, 0.0, u) * ghs::density(r, 0.0, s - u);
                },
                0.5 * s, 2.0 * std::sqrt(2.0 * r) + 3.0, 1e-11);
            CHECK(conv == doctest::Approx(ghs::density(2.0 * r, 0.0, s)).epsilon(1e-6));
        }
    }
}

TEST_CASE("GHS density-ratio identity") {
    for (double r : {0.5, 1.0, 2.0}) {
        for (double theta : {0.0, 0.5}) {
            const double rho = r * std::tan(theta);
            for (double s : {-3.0, -0.5, 0.0, 1.0, 2.5}) {
                const double lhs = ghs::density(2.0 * r + 2.0, theta, s) /
                                   ghs::density(2.0 * r, theta, s);
                const double rhs = r * (4.0 * r * r + s * s) /
                                   (2.0 * (2.0 * r + 1.0) * (r * r + rho * rho));
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("Esscher consistency of the tilt") {
    for (double r : {0.5, 2.0}) {
        for (double theta : {0.25, -0.6}) {
            for (double x : {-2.0, 0.0, 1.5}) {
                const double lhs = ghs::density(r, theta, x);
                const double rhs = std::exp(theta * x + r * std::log(std::cos(theta))) *
                                   ghs::density(r, 0.0, x);
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("classification of canonical triples") {
    using nef::QvfTriple;
    // the six family triples map back to themselves
    for (const auto& fam :
         {NefFamily::normal(1.0), NefFamily::normal(2.5), NefFamily::poisson(),
          NefFamily::gamma(2.0), NefFamily::binomial(3), NefFamily::neg_binomial(1.5),
          NefFamily::ghs(2.0)}) {
        const auto t = nef::family_triple(fam);
        const auto cls = nef::classify_qvf(t);
        CHECK(cls.family.tag == fam.tag);
        CHECK(cls.scale == doctest::Approx(1.0));
        CHECK(cls.shift == doctest::Approx(0.0));
        switch (fam.tag) {
            case Family::Normal: CHECK(cls.family.sigma2 == doctest::Approx(fam.sigma2)); break;
            case Family::Gamma:
            case Family::NegBinomial:
                CHECK(cls.family.shape2s == doctest::Approx(fam.shape2s));
                break;
            case Family::Binomial: CHECK(cls.family.kappa == fam.kappa); break;
            case Family::GHS: CHECK(cls.family.r == doctest::Approx(fam.r)); break;
            default: break;
        }
    }

    CHECK(nef::classify_qvf({0.0, 0.0, 1.0}).family.tag == Family::Normal);
    const auto g = nef::classify_qvf({0.5, 0.0, 2.0});  // (1/r, 0, r) with r = 2
    CHECK(g.family.tag == Family::GHS);
    CHECK(g.family.r == doctest::Approx(2.0));

    const auto bern = nef::classify_qvf({-1.0, 1.0, 0.0});
    CHECK(bern.family.tag == Family::Binomial);
    CHECK(bern.family.kappa == 1);
    REQUIRE(bern.warnings.size() == 1);
    CHECK(bern.warnings[0] == "excluded: a=0");

    // affine image of NB(2s=4) under Y = 2X + 1: disc = 4 = scale^2
    const auto shifted = nef::classify_qvf({0.25, 1.5, -1.75});
    CHECK(shifted.family.tag == Family::NegBinomial);
    CHECK(shifted.family.shape2s == doctest::Approx(4.0));
    CHECK(shifted.scale == doctest::Approx(2.0));
    CHECK(shifted.shift == doctest::Approx(1.0));

    CHECK_THROWS_AS(nef::classify_qvf({-0.37, 1.0, 0.0}), Unclassifiable);
    CHECK_THROWS_AS(nef::classify_qvf({0.0, 0.0, -1.0}), Unclassifiable);
    CHECK_THROWS_AS(nef::classify_qvf({-0.5, 0.0, -1.0}), Unclassifiable);
}

TEST_CASE("samplers reproduce moments within 4 SE") {
    Rng rng(12345u);

    SUBCASE("ghs symmetric median") {
        const auto d = nef::make_nef(NefFamily::ghs(1.0), 0.0);
        oracle::RunningStats st;
        int below = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double v = nef::sample_one(d, rng);
            st.push(v);
            if (v < 0.0) ++below;
        }
        const double frac = static_cast<double>(below) / n;
        CHECK(std::abs(frac - 0.5) < 4.0 * std::sqrt(0.25 / n));
        CHECK(std::abs(st.mean) < 4.0 * st.se_mean());
    }

    SUBCASE("poisson mean") {
        const auto d = nef::make_nef(NefFamily::poisson(), 2.0);
        oracle::RunningStats st;
        const int n = 100000;
        for (int i = 0; i < n; ++i) st.push(nef::sample_one(d, rng));
        CHECK(std::abs(st.mean - 2.0) < 4.0 * std::sqrt(2.0 / n));
    }

    SUBCASE("binomial variance") {
        const auto d = nef::make_nef(NefFamily::binomial(2), 1.0);
        oracle::RunningStats st;
        const int n = 100000;
        for (int i = 0; i < n; ++i) st.push(nef::sample_one(d, rng));
        // V = -rho^2/kappa + rho = 0.5; SE of sample variance ~ V sqrt(2/n)
        CHECK(std::abs(st.variance() - 0.5) < 4.0 * 0.5 * std::sqrt(2.0 / n));
    }

    SUBCASE("ghs tilted mean and variance") {
        const auto d = nef::make_nef(NefFamily::ghs(2.0), 2.0);
        oracle::RunningStats st;
        const int n = 200000;
        for (int i = 0; i < n; ++i) st.push(nef::sample_one(d, rng));
        CHECK(std::abs(st.mean - 2.0) < 4.0 * std::sqrt(4.0 / n));
        CHECK(std::abs(st.variance() - 4.0) < 4.0 * 4.0 * std::sqrt(2.0 / n));
    }

    SUBCASE("ghs table sampler agrees with rejection from a student-t proposal") {
        // independent sampling route: rejection against t_2 scaled to the
        // GHS mean/variance, envelope constant found on a dense grid
        const double r = 1.0, rho = 1.0;
        const auto d = nef::make_nef(NefFamily::ghs(r), rho);
        const double sd = std::sqrt(nef::moments(d).variance);
        auto proposal = [&](double x) {
            const double z = (x - rho) / sd;
            return 1.0 / (2.0 * std::sqrt(2.0) * sd) * std::pow(1.0 + z * z / 2.0, -1.5);
        };
        double envelope = 0.0;
        for (double x = rho - 60.0; x <= rho + 60.0; x += 0.01)
            envelope = std::max(envelope, nef::density(d, x) / proposal(x));
        envelope *= 1.2;
        oracle::RunningStats rej, tab;
        int accepted = 0;
        while (accepted < 40000) {
            // draw from t_2 via inverse CDF: x = (u - 1/2) sqrt(2/(u(1-u)))
            const double u = rng.uniform();
            const double z = (u - 0.5) * std::sqrt(2.0 / (u * (1.0 - u)));
            const double x = rho + sd * z;
            if (rng.uniform() * envelope * proposal(x) <= nef::density(d, x)) {
                rej.push(x);
                ++accepted;
            }
        }
        for (int i = 0; i < 40000; ++i) tab.push(nef::sample_one(d, rng));
        const double se = std::hypot(rej.se_mean(), tab.se_mean());
        CHECK(std::abs(rej.mean - tab.mean) < 4.0 * se);
        const double sev = std::hypot(rej.variance(), tab.variance()) *
                           std::sqrt(2.0 / 40000.0);
        CHECK(std::abs(rej.variance() - tab.variance()) < 4.0 * sev);
    }

    SUBCASE("negbinomial and gamma means") {
        const auto nb = nef::make_nef(NefFamily::neg_binomial(1.0), 2.0);
        const auto ga = nef::make_nef(NefFamily::gamma(2.0), 1.5);
        oracle::RunningStats snb, sga;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            snb.push(nef::sample_one(nb, rng));
            sga.push(nef::sample_one(ga, rng));
        }
        CHECK(std::abs(snb.mean - 2.0) < 4.0 * snb.se_mean());
        CHECK(std::abs(sga.mean - 1.5) < 4.0 * sga.se_mean());
        CHECK(std::abs(snb.variance() - 6.0) < 4.0 * 6.0 * std::sqrt(2.0 / n));
    }
}
