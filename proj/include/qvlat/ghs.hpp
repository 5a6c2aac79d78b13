#pragma once

// Numerics for the generalized hyperbolic secant (Meixner) distribution
//
//   p_{r,theta}(x) = exp(theta*x + r*log cos(theta)) * 2^(r-2)/(pi*Gamma(r))
//                    * |Gamma(r/2 + i*x/2)|^2 ,   r > 0, |theta| < pi/2.
//
// |Gamma| on the critical strip is evaluated through a complex log-gamma:
// a Lanczos approximation (g = 607/128, 15 terms) for moderate imaginary
// parts, and a Stirling series with argument shifting once |Im z| exceeds
// 20, where the Lanczos rational form starts to lose digits. The infinite
// product 6.1.25 of Abramowitz & Stegun serves as an independent check in
// the test suite, not as the production path: its convergence is only
// O(1/j) in the tail.

#include <complex>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

namespace qvlat::ghs {

// log Gamma(z) for Re z > 0, principal branch.
std::complex<double> log_gamma(std::complex<double> z);

// log |Gamma(r/2 + i x/2)|^2 = 2 Re log Gamma(r/2 + i x/2)
double log_abs_gamma_sq(double r, double x);

// log and plain density of GHS(r, theta)
double log_density(double r, double theta, double x);
double density(double r, double theta, double x);

// Moment generating function (cos(theta)/cos(theta+t))^r; requires
// |theta + t| < pi/2 and throws DomainError at or beyond the pole.
double mgf(double r, double theta, double t);

// Tabulated inverse CDF of a density on an interval: stores the node grid
// and the normalized cumulative mass at each node; sampling inverts by
// binary search with linear interpolation inside a cell, so resolution in
// the tails is set by the x-grid, not by a uniform probability grid.
class InverseCdfTable {
  public:
    // Build from log-density evaluated on the (sorted) node grid x.
    InverseCdfTable(const std::vector<double>& x, const std::vector<double>& log_pdf);

    double sample(double u) const;  // u in (0,1)

    // Interpolate between two tables at common u, weight w on `b`.
    static double sample_blend(const InverseCdfTable& a, const InverseCdfTable& b,
                               double w, double u);

  private:
    std::vector<double> x_;
    std::vector<double> cdf_;  // normalized, increasing, cdf_.back() == 1
};

// Marginal sampler table for GHS(r, theta): covers all but ~1e-12 tail mass.
std::shared_ptr<const InverseCdfTable> marginal_table(double r, double theta);

// Conditional bond kernel of the GHS redistribution model, keyed by
// (r, s = eta_x + eta_y); the mean tilt theta cancels between numerator
// and normalizer so tables depend on (r, s) only. s is quantized to a
// 1e-3 grid and samples are interpolated between the bracketing tables.
// Shared LRU cache; thread safe.
class ConditionalSampler {
  public:
    explicit ConditionalSampler(double r, std::size_t cache_capacity = 16384);

    // Sample beta = new left state given bond sum s.
    double sample(double s, double u) const;

    // Conditional density of beta given the bond sum s.
    double density(double s, double beta) const;

    double r() const { return r_; }

  private:
    std::shared_ptr<const InverseCdfTable> table_at_grid(std::int64_t q) const;

    double r_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::int64_t,
                               std::pair<std::shared_ptr<const InverseCdfTable>,
                                         std::list<std::int64_t>::iterator>>
        cache_;
    mutable std::list<std::int64_t> lru_;
};

}  // namespace qvlat::ghs
