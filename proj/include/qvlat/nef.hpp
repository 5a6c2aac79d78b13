#pragma once

// The six natural exponential families with quadratic variance function,
// mean-parameterized. Each family carries its shape parameter:
//   Normal(sigma2)  V = sigma2            support R
//   Poisson         V = rho               support N0
//   Gamma(2s)       V = rho^2/(2s)        support R+
//   Binomial(kappa) V = -rho^2/kappa+rho  support {0..kappa}
//   NegBinomial(2s) V = rho^2/(2s)+rho    support N0
//   GHS(r)          V = rho^2/r + r       support R
// The GHS tilt is theta = arctan(rho/r).

#include <string>
#include <vector>

#include "qvlat/rng.hpp"

namespace qvlat::nef {

enum class Family { Normal, Poisson, Gamma, Binomial, NegBinomial, GHS };

enum class Support { RealLine, HalfLine, Naturals, Range0K };

struct NefFamily {
    Family tag = Family::Normal;
    double sigma2 = 1.0;   // Normal
    double shape2s = 1.0;  // Gamma / NegBinomial
    int kappa = 1;         // Binomial
    double r = 1.0;        // GHS

    static NefFamily normal(double sigma2);
    static NefFamily poisson();
    static NefFamily gamma(double shape2s);
    static NefFamily binomial(int kappa);
    static NefFamily neg_binomial(double shape2s);
    static NefFamily ghs(double r);

    Support support() const;
    std::string name() const;
    bool discrete() const;
};

struct QvfTriple {
    double v2 = 0.0, v1 = 0.0, v0 = 0.0;
    double operator()(double rho) const { return v2 * rho * rho + v1 * rho + v0; }
};

// Variance triple of a family in its own parameterization.
QvfTriple family_triple(const NefFamily& f);

struct NefDistribution {
    NefFamily family;
    double rho = 0.0;
    double theta = 0.0;  // GHS tilt, arctan(rho/r); 0 otherwise
};

// Validates shape and mean-domain (open endpoints) and derives theta.
NefDistribution make_nef(const NefFamily& family, double rho);

// Density for continuous families, probability mass for discrete ones.
double density(const NefDistribution& d, double x);
double log_density(const NefDistribution& d, double x);

// (mean, variance) = (rho, V(rho)).
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};
Moments moments(const NefDistribution& d);

// Raw moment E[X^k] by summation / quadrature (oracle-grade, not fast).
double raw_moment(const NefDistribution& d, int k);

// atanh-map scale for whole-line quadrature against this density; for GHS
// the exponential tail rate pi/2 - |theta| dictates it
double integration_scale(const NefDistribution& d);

double sample_one(const NefDistribution& d, Rng& rng);
std::vector<double> sample(const NefDistribution& d, std::size_t n, Rng& rng);

double ghs_mgf(double r, double theta, double t);

// Canonical classification of a quadratic variance function. The returned
// family has its shape parameter set from v2; (scale, shift) is the affine
// map carrying the canonical family triple onto the input, i.e. the input
// variable is scale * X + shift for X in the canonical family.
struct Classified {
    NefFamily family;
    double scale = 1.0;
    double shift = 0.0;
    std::vector<std::string> warnings;
};
Classified classify_qvf(const QvfTriple& t);

}  // namespace qvlat::nef
