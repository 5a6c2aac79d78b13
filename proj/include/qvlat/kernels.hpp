#pragma once

// Conditional redistribution kernels on a bond. Given states (eta_x, eta_y)
// with sum s, a bond event replaces them by (beta, s - beta) where beta is a
// fresh draw from the invariant pair law conditioned on the sum. The kernel
// never depends on the mean parameter: the exponential tilts cancel between
// numerator and normalizer, so a BondKernel is built from the family's shape
// alone. The transfer variable is alpha = eta_x - beta.

#include <memory>
#include <utility>

#include "qvlat/ghs.hpp"
#include "qvlat/nef.hpp"
#include "qvlat/poly2.hpp"
#include "qvlat/rng.hpp"

namespace qvlat::kernels {

class BondKernel {
  public:
    explicit BondKernel(const nef::NefFamily& family);

    const nef::NefFamily& family() const { return family_; }

    // Are (eta_x, eta_y) valid one-site states for this family?
    bool admissible(double ex, double ey) const;

    // Density (mass) of the transfer alpha given the pair; zero off support.
    double density(double ex, double ey, double alpha) const;

    // First moment of alpha: (eta_x - eta_y)/2, exactly.
    double m1(double ex, double ey) const;

    // Closed-form second moment of alpha.
    double m2(double ex, double ey) const;

    // Brute-force second moment: summation (discrete) or adaptive
    // quadrature (continuous) to 1e-10.
    double m2_numeric(double ex, double ey) const;

    // E[f(beta, s - beta)] for beta distributed as the conditional law of
    // the departure state given the bond sum s. Exact for all families
    // except GHS, which integrates numerically.
    double conditional_expectation(double s, const Poly2& f) const;

    double sample_transfer(double ex, double ey, Rng& rng) const;

    // Fresh conditioned pair; the sum is preserved exactly because the
    // second component is computed as s - beta.
    std::pair<double, double> thermalize(double ex, double ey, Rng& rng) const;

  private:
    double sample_beta(double s, double ex, Rng& rng) const;
    void check_states(double ex, double ey) const;

    nef::NefFamily family_;
    std::shared_ptr<ghs::ConditionalSampler> ghs_;
};

}  // namespace qvlat::kernels
