#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qvlat/errors.hpp"
#include "qvlat/models.hpp"

using namespace qvlat;
using models::ModelSpec;
using nef::NefFamily;

namespace {

std::vector<ModelSpec> all_models() {
    return {
        ModelSpec::redistribution(NefFamily::normal(1.0), 0.5),
        ModelSpec::redistribution(NefFamily::poisson(), 2.0),
        ModelSpec::redistribution(NefFamily::gamma(1.0), 2.0),
        ModelSpec::redistribution(NefFamily::binomial(2), 1.0),
        ModelSpec::redistribution(NefFamily::neg_binomial(1.0), 2.0),
        ModelSpec::redistribution(NefFamily::ghs(1.0), 0.5),
        ModelSpec::irw(2.0),
        ModelSpec::pep(2, 1.0),
        ModelSpec::pep(3, 1.5),
        ModelSpec::sip(1.0, 2.0),
        ModelSpec::sip(2.0, 2.0),
        ModelSpec::harmonic(1.0, 2.0),
        ModelSpec::harmonic(2.0, 2.0),
        ModelSpec::ginzburg_landau(0.5, 0.0),
        ModelSpec::ginzburg_landau(1.0, 0.5),
    };
}

}  // namespace

TEST_CASE("gradient coefficients: D per model") {
    // redistribution kinds all have D = 1/2 under the half pair-sum convention
    for (const auto& fam : {NefFamily::normal(1.0), NefFamily::poisson(),
                            NefFamily::gamma(2.0), NefFamily::binomial(3),
                            NefFamily::neg_binomial(2.0), NefFamily::ghs(2.0)}) {
        const auto m = ModelSpec::redistribution(fam, fam.tag == nef::Family::Binomial ? 1.5 : 1.0);
        const auto lc = models::extract_linear_coeffs(m);
        CHECK(lc.D == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(std::abs(lc.r) < 1e-7);
        CHECK(std::abs(lc.p + lc.q) < 1e-7);
    }
    CHECK(models::extract_linear_coeffs(ModelSpec::irw(1.0)).D == doctest::Approx(0.5));
    CHECK(models::extract_linear_coeffs(ModelSpec::sip(2.0, 1.0)).D == doctest::Approx(1.0));
    CHECK(models::extract_linear_coeffs(ModelSpec::pep(2, 1.0)).D == doctest::Approx(1.0));
    CHECK(models::extract_linear_coeffs(ModelSpec::pep(3, 1.0)).D ==
          doctest::Approx(1.5));
    // harmonic: sum_{alpha<=n} alpha c_alpha(n) = n/(2s), so D = 1/(2 * 2s)
    CHECK(models::extract_linear_coeffs(ModelSpec::harmonic(1.0, 1.0)).D ==
          doctest::Approx(0.5).epsilon(1e-10));
    CHECK(models::extract_linear_coeffs(ModelSpec::harmonic(2.0, 1.0)).D ==
          doctest::Approx(0.25).epsilon(1e-10));
    // Ginzburg-Landau: D = 1/(2 sigma2)
    CHECK(models::extract_linear_coeffs(ModelSpec::ginzburg_landau(0.5, 0.0)).D ==
          doctest::Approx(1.0));
    CHECK(models::extract_linear_coeffs(ModelSpec::ginzburg_landau(1.0, 0.0)).D ==
          doctest::Approx(0.5));
}

TEST_CASE("quadratic coefficients: hand-expanded tuples") {
    const auto pois = models::extract_quadratic_coeffs(
        ModelSpec::redistribution(NefFamily::poisson(), 2.0));
    CHECK(pois.a == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pois.b == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(pois.c == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(std::abs(pois.d) < 1e-12);

    const auto irw = models::extract_quadratic_coeffs(ModelSpec::irw(2.0));
    CHECK(irw.a == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(irw.b == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(irw.c == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(irw.d) < 1e-12);

    const auto sip = models::extract_quadratic_coeffs(ModelSpec::sip(2.0, 1.0));
    CHECK(sip.a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sip.b == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(sip.c == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(sip.d) < 1e-12);

    const auto pep = models::extract_quadratic_coeffs(ModelSpec::pep(2, 1.0));
    CHECK(pep.a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pep.b == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pep.c == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(pep.d) < 1e-12);
}

TEST_CASE("qvf relations reproduce the classification tuples") {
    CHECK(std::abs(models::qvf_from_coeffs({0, 0, 0, 0.25, -0.5, -0.25, 0, 0.5, 0}).v2) <
          1e-12);
    const auto t_pois = models::qvf_from_coeffs({0, 0, 0, 0.25, -0.5, -0.25, 0, 0.5, 0});
    CHECK(t_pois.v1 == doctest::Approx(1.0));
    CHECK(std::abs(t_pois.v0) < 1e-12);

    const auto t_sip = models::qvf_from_coeffs({0, 0, 0, 1.0, -3.0, -1.0, 0, 1.0, 0});
    CHECK(t_sip.v2 == doctest::Approx(0.5));
    CHECK(t_sip.v1 == doctest::Approx(1.0));
    CHECK(std::abs(t_sip.v0) < 1e-12);

    const auto t_pep = models::qvf_from_coeffs({0, 0, 0, 1.0, -1.0, -1.0, 0, 1.0, 0});
    CHECK(t_pep.v2 == doctest::Approx(-0.5));
    CHECK(t_pep.v1 == doctest::Approx(1.0));
    CHECK(std::abs(t_pep.v0) < 1e-12);

    CHECK_THROWS_AS(models::qvf_from_coeffs({0, 0, 0, 0.0, 1, 1, 1, 0, 0}),
                    Degenerate);
}

TEST_CASE("classification theorem holds for every implemented model") {
    for (const auto& m : all_models()) {
        CAPTURE(m.name());
        const auto qc = models::extract_quadratic_coeffs(m);
        const auto triple = models::qvf_from_coeffs(qc);
        const auto want = nef::family_triple(m.invariant_family());
        const double tol = m.exact_arithmetic() ? 1e-8 : 1e-6;
        CHECK(std::abs(triple.v2 - want.v2) < tol);
        CHECK(std::abs(triple.v1 - want.v1) < tol);
        CHECK(std::abs(triple.v0 - want.v0) < tol);
        CHECK(qc.a > 0.0);
    }
}

TEST_CASE("Bernoulli-type exclusions") {
    CHECK_THROWS_AS(ModelSpec::pep(1, 0.5), DomainError);
    // binomial redistribution with kappa = 1 kills the quadratic action
    const auto m = ModelSpec::redistribution(NefFamily::binomial(1), 0.5);
    CHECK_THROWS_AS(models::extract_quadratic_coeffs(m), Degenerate);
}

TEST_CASE("extraction is grid-invariant") {
    // same coefficients from a shifted admissible grid
    const auto m = ModelSpec::sip(1.0, 2.0);
    const auto qc = models::extract_quadratic_coeffs(m);
    const Poly2 f = Poly2::x0() * Poly2::x1();
    // manual fit on a different set of points in general position
    std::vector<std::pair<double, double>> grid;
    for (int i = 2; i <= 9; ++i)
        for (int j = 1; j <= 5; ++j) grid.emplace_back(i, j);
    double worst = 0.0;
    for (const auto& [e0, e1] : grid) {
        const double lhs = m.bond_apply(f, e0, e1);
        const double fit = qc.a * (e0 * e0 + e1 * e1) + qc.b * e0 * e1 +
                           qc.c * (e0 + e1) + qc.d;
        worst = std::max(worst, std::abs(lhs - fit));
    }
    CHECK(worst < 1e-9);  // closure extends beyond the fitting grid
}

TEST_CASE("assumption reports pass for every model") {
    for (const auto& m : all_models()) {
        CAPTURE(m.name());
        const auto rep = models::verify_assumptions(m);
        INFO(rep.summary());
        CHECK(rep.all_pass());
    }
}

TEST_CASE("harmonic per-alpha rates: first moment identity") {
    // sum_alpha alpha c_alpha(n) = n / (2s); rates computed with the 1/alpha
    // denominator reading of the jump rate
    const auto m = ModelSpec::harmonic(1.5, 1.0);
    for (long long n : {1LL, 2LL, 5LL, 9LL}) {
        const auto pre = m.harmonic_prefix(n);
        double first = 0.0;
        for (long long a = 1; a <= n; ++a)
            first +=
                static_cast<double>(a) * ((*pre)[a - 1] - (a > 1 ? (*pre)[a - 2] : 0.0));
        CHECK(first == doctest::Approx(static_cast<double>(n) / 1.5).epsilon(1e-12));
    }
}
