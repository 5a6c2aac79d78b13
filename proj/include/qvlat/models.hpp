#pragma once

// Dynamics definitions and the degree-preserving tool chain. Every model
// exposes its bond operator L_{0,1} through bond_apply; coefficient
// extraction evaluates that operator on polynomial test functions at a
// deterministic grid of admissible state pairs and fits
//   L_{0,1} eta_0        = p eta_0 + q eta_1 + r,
//   L_{0,1}(eta_0 eta_1) = a (eta_0^2+eta_1^2) + b eta_0 eta_1
//                          + c (eta_0+eta_1) + d,
// certifying r = 0, p + q = 0 (gradient form, D = -p) and the quadratic
// closure. The bond convention is the half pair sum: for redistribution
// kinds L_{0,1} = (1/2)(grad_{0,1} + grad_{1,0}), which is one bond
// thermalization at rate one.

#include <memory>
#include <string>
#include <vector>

#include "qvlat/kernels.hpp"
#include "qvlat/nef.hpp"
#include "qvlat/poly2.hpp"

namespace qvlat::models {

enum class Kind { Redistribution, IRW, PEP, SIP, Harmonic, GinzburgLandau };

class ModelSpec {
  public:
    static ModelSpec redistribution(const nef::NefFamily& family, double rho);
    static ModelSpec irw(double rho);
    static ModelSpec pep(int kappa, double rho);
    static ModelSpec sip(double shape2s, double rho);
    static ModelSpec harmonic(double shape2s, double rho);
    static ModelSpec ginzburg_landau(double sigma2, double rho);

    Kind kind() const { return kind_; }
    double rho() const { return rho_; }
    int kappa() const { return kappa_; }
    double shape2s() const { return shape2s_; }
    double sigma2() const { return sigma2_; }

    // Invariant one-site marginal family (with shape) and distribution at rho.
    const nef::NefFamily& invariant_family() const { return inv_family_; }
    nef::NefDistribution invariant_marginal() const;

    // Redistribution kinds only.
    const kernels::BondKernel& kernel() const;

    bool discrete_states() const;
    // true when bond_apply is exact arithmetic (everything but GHS kernels)
    bool exact_arithmetic() const;

    std::string name() const;

    // (L_{0,1} f)(e0, e1) for a polynomial test function f.
    double bond_apply(const Poly2& f, double e0, double e1) const;

    // directed jump rate r(from, to-state) for the particle kinds
    double directed_rate(double e_from, double e_to) const;

    // Harmonic: prefix sums of the per-alpha rates c_alpha(n), alpha = 1..n.
    // Entries are immutable once built; the cache is shared and synchronized,
    // so ModelSpec copies stay cheap and replicas can run in parallel.
    std::shared_ptr<const std::vector<double>> harmonic_prefix(long long n) const;
    double harmonic_total_rate(long long n) const;

    // state pairs in general position for coefficient extraction
    std::vector<std::pair<double, double>> evaluation_grid() const;

  private:
    ModelSpec() = default;

    struct HarmonicCache;

    Kind kind_ = Kind::Redistribution;
    double rho_ = 1.0;
    int kappa_ = 2;
    double shape2s_ = 1.0;
    double sigma2_ = 1.0;
    nef::NefFamily inv_family_;
    std::shared_ptr<kernels::BondKernel> kernel_;
    std::shared_ptr<HarmonicCache> harm_cache_;
};

struct QuadraticCoeffs {
    double p = 0.0, q = 0.0, r = 0.0;  // linear action
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    double D = 0.0;  // = -p
    double residual = 0.0;
};

struct LinearCoeffs {
    double p = 0.0, q = 0.0, r = 0.0, D = 0.0;
};

LinearCoeffs extract_linear_coeffs(const ModelSpec& m);
QuadraticCoeffs extract_quadratic_coeffs(const ModelSpec& m);
nef::QvfTriple qvf_from_coeffs(const QuadraticCoeffs& qc);

// L_{0,1} applied to an arbitrary polynomial of degree <= 2, reconstructed
// from the extracted coefficients through the A2 product identities.
Poly2 bond_action_on_quadratic(const QuadraticCoeffs& qc, const Poly2& f);

struct Check {
    std::string name;
    double magnitude = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct AssumptionReport {
    std::vector<Check> checks;
    bool all_pass() const;
    std::string summary() const;
};

AssumptionReport verify_assumptions(const ModelSpec& m, double tol_scale = 1.0);

}  // namespace qvlat::models
