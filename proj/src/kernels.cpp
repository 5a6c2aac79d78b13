#include "qvlat/kernels.hpp"

#include <cmath>
#include <vector>

#include "qvlat/errors.hpp"
#include "qvlat/quadrature.hpp"

namespace qvlat::kernels {

namespace {

using nef::Family;

bool is_integer(double x) { return x == std::floor(x); }

double log_binom(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// pmf of the conditional departure state beta given sum s, discrete families
double discrete_beta_pmf(const nef::NefFamily& f, double s, double beta) {
    switch (f.tag) {
        case Family::Poisson:
            return std::exp(log_binom(s, beta) - s * std::log(2.0));
        case Family::Binomial:
            return std::exp(log_binom(f.kappa, beta) + log_binom(f.kappa, s - beta) -
                            log_binom(2.0 * f.kappa, s));
        case Family::NegBinomial: {
            const double m = f.shape2s;
            // BetaBinomial(s, m, m)
            return std::exp(log_binom(s, beta) + std::lgamma(m + beta) +
                            std::lgamma(m + s - beta) + std::lgamma(2.0 * m) -
                            std::lgamma(m) - std::lgamma(m) - std::lgamma(2.0 * m + s));
        }
        default: return 0.0;
    }
}

void discrete_beta_range(const nef::NefFamily& f, double s, long long& lo, long long& hi) {
    lo = 0;
    hi = static_cast<long long>(s);
    if (f.tag == Family::Binomial) {
        lo = std::max<long long>(0, static_cast<long long>(s) - f.kappa);
        hi = std::min<long long>(f.kappa, static_cast<long long>(s));
    }
}

}  // namespace

BondKernel::BondKernel(const nef::NefFamily& family) : family_(family) {
    if (family.tag == Family::GHS)
        ghs_ = std::make_shared<ghs::ConditionalSampler>(family.r);
}

bool BondKernel::admissible(double ex, double ey) const {
    switch (family_.tag) {
        case Family::Normal:
        case Family::GHS: return true;
        case Family::Gamma: return ex >= 0.0 && ey >= 0.0 && ex + ey > 0.0;
        case Family::Poisson:
        case Family::NegBinomial:
            return ex >= 0.0 && ey >= 0.0 && is_integer(ex) && is_integer(ey);
        case Family::Binomial:
            return ex >= 0.0 && ey >= 0.0 && ex <= family_.kappa && ey <= family_.kappa &&
                   is_integer(ex) && is_integer(ey);
    }
    return false;
}

void BondKernel::check_states(double ex, double ey) const {
    if (!admissible(ex, ey))
        throw DomainError("bond kernel: states (" + std::to_string(ex) + ", " +
                          std::to_string(ey) + ") outside the family state space");
}

double BondKernel::density(double ex, double ey, double alpha) const {
    check_states(ex, ey);
    const double s = ex + ey;
    const double beta = ex - alpha;
    switch (family_.tag) {
        case Family::Normal: {
            const double var = 0.5 * family_.sigma2;
            const double z = alpha - 0.5 * (ex - ey);
            return std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
        }
        case Family::Gamma: {
            if (!(beta > 0.0 && s - beta > 0.0)) return 0.0;
            const double m = family_.shape2s;
            return std::exp(std::lgamma(2.0 * m) - 2.0 * std::lgamma(m) +
                            (m - 1.0) * (std::log(beta) + std::log(s - beta)) -
                            (2.0 * m - 1.0) * std::log(s));
        }
        case Family::GHS: return ghs_->density(s, beta);
        case Family::Poisson:
        case Family::Binomial:
        case Family::NegBinomial: {
            if (!is_integer(alpha)) return 0.0;
            long long lo, hi;
            discrete_beta_range(family_, s, lo, hi);
            const auto b = static_cast<long long>(beta);
            if (b < lo || b > hi) return 0.0;
            return discrete_beta_pmf(family_, s, beta);
        }
    }
    return 0.0;
}

double BondKernel::m1(double ex, double ey) const {
    check_states(ex, ey);
    return 0.5 * (ex - ey);
}

double BondKernel::m2(double ex, double ey) const {
    check_states(ex, ey);
    const double s = ex + ey;
    const double d = ex - ey;
    switch (family_.tag) {
        case Family::Normal: return 0.5 * family_.sigma2 + 0.25 * d * d;
        case Family::Poisson: return 0.25 * (ex * ex - 2.0 * ex * ey + ey * ey + ex + ey);
        case Family::Gamma: {
            const double m = family_.shape2s;  // paper shape 2s; 4s+1 = 2m+1
            return s * s / (4.0 * (2.0 * m + 1.0)) + 0.25 * d * d;
        }
        case Family::Binomial: {
            const double k = family_.kappa;
            return (k - 1.0) / (4.0 * k - 2.0) * (ex * ex + ey * ey) -
                   k / (2.0 * k - 1.0) * ex * ey + k / (4.0 * k - 2.0) * (ex + ey);
        }
        case Family::NegBinomial: {
            const double m = family_.shape2s;
            return (m + 1.0) / (2.0 * (2.0 * m + 1.0)) * (ex * ex + ey * ey) -
                   m / (2.0 * m + 1.0) * ex * ey +
                   0.5 * m / (2.0 * m + 1.0) * (ex + ey);
        }
        case Family::GHS: {
            const double r = family_.r;
            // from the density-ratio identity for p_{2r+2}/p_{2r}
            return ex * ey + 0.5 * d * d + r * r -
                   r * (4.0 * r * r + s * s) / (2.0 * (2.0 * r + 1.0));
        }
    }
    return 0.0;
}

double BondKernel::m2_numeric(double ex, double ey) const {
    check_states(ex, ey);
    const double s = ex + ey;
    if (family_.discrete()) {
        long long lo, hi;
        discrete_beta_range(family_, s, lo, hi);
        double acc = 0.0;
        for (long long b = lo; b <= hi; ++b) {
            const double alpha = ex - static_cast<double>(b);
            acc += alpha * alpha * discrete_beta_pmf(family_, s, static_cast<double>(b));
        }
        return acc;
    }
    switch (family_.tag) {
        case Family::Normal: {
            auto f = [&](double a) { return a * a * density(ex, ey, a); };
            const double m = m1(ex, ey);
            return integrate_real_line(f, m, 2.0 + std::sqrt(family_.sigma2), 1e-10);
        }
        case Family::Gamma: {
            auto f = [&](double a) { return a * a * density(ex, ey, a); };
            // support alpha in (ex - s, ex) = (-ey, ex)
            return integrate_interval_smoothed(f, -ey, ex, 1e-10);
        }
        case Family::GHS: {
            auto f = [&](double a) { return a * a * density(ex, ey, a); };
            const double r = family_.r;
            const double sd = std::sqrt((s * s + 4.0 * r * r) / (4.0 * (2.0 * r + 1.0)));
            return integrate_real_line(f, m1(ex, ey), 2.0 * sd + 2.0, 1e-10);
        }
        default: break;
    }
    return 0.0;
}

double BondKernel::conditional_expectation(double s, const Poly2& f) const {
    if (family_.discrete()) {
        long long lo, hi;
        discrete_beta_range(family_, s, lo, hi);
        double acc = 0.0;
        for (long long b = lo; b <= hi; ++b) {
            const auto beta = static_cast<double>(b);
            acc += f.eval(beta, s - beta) * discrete_beta_pmf(family_, s, beta);
        }
        return acc;
    }
    switch (family_.tag) {
        case Family::Normal: {
            // beta = s/2 + u, u ~ N(0, sigma2/2): expand in powers of u and
            // use central normal moments. Exact for polynomials.
            const int deg = f.degree();
            std::vector<double> pu(2 * deg + 1, 0.0);
            const double h = 0.5 * s;
            for (int i = 0; i <= Poly2::kMaxDeg; ++i)
                for (int j = 0; j <= Poly2::kMaxDeg; ++j) {
                    const double c = f.at(i, j);
                    if (c == 0.0) continue;
                    // (h+u)^i * (h-u)^j
                    std::vector<double> a(i + 1, 0.0), b(j + 1, 0.0);
                    for (int p = 0; p <= i; ++p)
                        a[p] = std::exp(log_binom(i, p)) * std::pow(h, i - p);
                    for (int q = 0; q <= j; ++q)
                        b[q] = std::exp(log_binom(j, q)) * std::pow(h, j - q) *
                               ((q % 2) ? -1.0 : 1.0);
                    for (int p = 0; p <= i; ++p)
                        for (int q = 0; q <= j; ++q) pu[p + q] += c * a[p] * b[q];
                }
            const double var = 0.5 * family_.sigma2;
            double acc = 0.0, mom = 1.0;
            for (std::size_t m = 0; m < pu.size(); m += 2) {
                acc += pu[m] * mom;
                mom *= var * static_cast<double>(m + 1);  // E[u^{m+2}] = (m+1) var E[u^m]
            }
            return acc;
        }
        case Family::Gamma: {
            // beta = s*B, B ~ Beta(m, m): E[B^i (1-B)^j] in closed form.
            const double m = family_.shape2s;
            double acc = 0.0;
            for (int i = 0; i <= Poly2::kMaxDeg; ++i)
                for (int j = 0; j <= Poly2::kMaxDeg; ++j) {
                    const double c = f.at(i, j);
                    if (c == 0.0) continue;
                    const double mom =
                        std::exp(std::lgamma(m + i) + std::lgamma(m + j) +
                                 std::lgamma(2.0 * m) - std::lgamma(m) - std::lgamma(m) -
                                 std::lgamma(2.0 * m + i + j));
                    acc += c * std::pow(s, i + j) * mom;
                }
            return acc;
        }
        case Family::GHS: {
            const double r = family_.r;
            const double sd = std::sqrt((s * s + 4.0 * r * r) / (4.0 * (2.0 * r + 1.0)));
            auto g = [&](double beta) {
                return f.eval(beta, s - beta) * ghs_->density(s, beta);
            };
            return integrate_real_line(g, 0.5 * s, 2.0 * sd + 2.0, 1e-10);
        }
        default: break;
    }
    return 0.0;
}

double BondKernel::sample_beta(double s, double ex, Rng& rng) const {
    switch (family_.tag) {
        case Family::Normal:
            return 0.5 * s + std::sqrt(0.5 * family_.sigma2) * rng.normal();
        case Family::Poisson:
            return static_cast<double>(rng.binomial_half(static_cast<long long>(s)));
        case Family::Gamma:
            return s * rng.beta(family_.shape2s, family_.shape2s);
        case Family::Binomial: {
            // urn draw: s draws without replacement from 2k items, k marked
            long long marked = family_.kappa;
            long long total = 2LL * family_.kappa;
            long long got = 0;
            for (long long d = 0; d < static_cast<long long>(s); ++d) {
                if (rng.uniform() * static_cast<double>(total) < static_cast<double>(marked)) {
                    ++got;
                    --marked;
                }
                --total;
            }
            return static_cast<double>(got);
        }
        case Family::NegBinomial: {
            const double p = rng.beta(family_.shape2s, family_.shape2s);
            return static_cast<double>(rng.binomial(static_cast<long long>(s), p));
        }
        case Family::GHS: return ghs_->sample(s, rng.uniform());
    }
    (void)ex;
    return 0.0;
}

double BondKernel::sample_transfer(double ex, double ey, Rng& rng) const {
    check_states(ex, ey);
    return ex - sample_beta(ex + ey, ex, rng);
}

std::pair<double, double> BondKernel::thermalize(double ex, double ey, Rng& rng) const {
    check_states(ex, ey);
    const double s = ex + ey;
    const double beta = sample_beta(s, ex, rng);
    return {beta, s - beta};
}

}  // namespace qvlat::kernels
