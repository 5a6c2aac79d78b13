#include "qvlat/nef.hpp"

#include <cmath>

#include "qvlat/errors.hpp"
#include "qvlat/ghs.hpp"
#include "qvlat/quadrature.hpp"

namespace qvlat::nef {

NefFamily NefFamily::normal(double sigma2) {
    if (!(sigma2 > 0.0)) throw DomainError("Normal: sigma2 must be positive");
    NefFamily f;
    f.tag = Family::Normal;
    f.sigma2 = sigma2;
    return f;
}

NefFamily NefFamily::poisson() {
    NefFamily f;
    f.tag = Family::Poisson;
    return f;
}

NefFamily NefFamily::gamma(double shape2s) {
    if (!(shape2s > 0.0)) throw DomainError("Gamma: shape 2s must be positive");
    NefFamily f;
    f.tag = Family::Gamma;
    f.shape2s = shape2s;
    return f;
}

NefFamily NefFamily::binomial(int kappa) {
    if (kappa < 1) throw DomainError("Binomial: kappa must be an integer >= 1");
    NefFamily f;
    f.tag = Family::Binomial;
    f.kappa = kappa;
    return f;
}

NefFamily NefFamily::neg_binomial(double shape2s) {
    if (!(shape2s > 0.0)) throw DomainError("NegBinomial: shape 2s must be positive");
    NefFamily f;
    f.tag = Family::NegBinomial;
    f.shape2s = shape2s;
    return f;
}

NefFamily NefFamily::ghs(double r) {
    if (!(r > 0.0)) throw DomainError("GHS: shape r must be positive");
    NefFamily f;
    f.tag = Family::GHS;
    f.r = r;
    return f;
}

Support NefFamily::support() const {
    switch (tag) {
        case Family::Normal:
        case Family::GHS: return Support::RealLine;
        case Family::Gamma: return Support::HalfLine;
        case Family::Poisson:
        case Family::NegBinomial: return Support::Naturals;
        case Family::Binomial: return Support::Range0K;
    }
    return Support::RealLine;
}

std::string NefFamily::name() const {
    switch (tag) {
        case Family::Normal: return "normal";
        case Family::Poisson: return "poisson";
        case Family::Gamma: return "gamma";
        case Family::Binomial: return "binomial";
        case Family::NegBinomial: return "negbinomial";
        case Family::GHS: return "ghs";
    }
    return "?";
}

bool NefFamily::discrete() const {
    return tag == Family::Poisson || tag == Family::Binomial ||
           tag == Family::NegBinomial;
}

QvfTriple family_triple(const NefFamily& f) {
    switch (f.tag) {
        case Family::Normal: return {0.0, 0.0, f.sigma2};
        case Family::Poisson: return {0.0, 1.0, 0.0};
        case Family::Gamma: return {1.0 / f.shape2s, 0.0, 0.0};
        case Family::Binomial: return {-1.0 / f.kappa, 1.0, 0.0};
        case Family::NegBinomial: return {1.0 / f.shape2s, 1.0, 0.0};
        case Family::GHS: return {1.0 / f.r, 0.0, f.r};
    }
    return {};
}

NefDistribution make_nef(const NefFamily& family, double rho) {
    switch (family.tag) {
        case Family::Normal:
        case Family::GHS: break;
        case Family::Poisson:
        case Family::Gamma:
        case Family::NegBinomial:
            if (!(rho > 0.0)) throw DomainError(family.name() + ": mean must be positive");
            break;
        case Family::Binomial:
            if (!(rho > 0.0 && rho < family.kappa))
                throw DomainError("binomial: mean must lie in (0, kappa)");
            break;
    }
    NefDistribution d;
    d.family = family;
    d.rho = rho;
    if (family.tag == Family::GHS) d.theta = std::atan(rho / family.r);
    return d;
}

double log_density(const NefDistribution& d, double x) {
    const auto& f = d.family;
    switch (f.tag) {
        case Family::Normal: {
            const double z = x - d.rho;
            return -0.5 * z * z / f.sigma2 - 0.5 * std::log(2.0 * M_PI * f.sigma2);
        }
        case Family::Poisson: {
            if (x < 0.0 || x != std::floor(x)) throw DomainError("poisson: x must be in N0");
            return x * std::log(d.rho) - d.rho - std::lgamma(x + 1.0);
        }
        case Family::Gamma: {
            if (!(x > 0.0)) throw DomainError("gamma: x must be positive");
            const double scale = d.rho / f.shape2s;
            return (f.shape2s - 1.0) * std::log(x) - x / scale -
                   std::lgamma(f.shape2s) - f.shape2s * std::log(scale);
        }
        case Family::Binomial: {
            if (x < 0.0 || x > f.kappa || x != std::floor(x))
                throw DomainError("binomial: x must be in {0..kappa}");
            const double p = d.rho / f.kappa;
            return std::lgamma(f.kappa + 1.0) - std::lgamma(x + 1.0) -
                   std::lgamma(f.kappa - x + 1.0) + x * std::log(p) +
                   (f.kappa - x) * std::log1p(-p);
        }
        case Family::NegBinomial: {
            if (x < 0.0 || x != std::floor(x))
                throw DomainError("negbinomial: x must be in N0");
            const double m = f.shape2s;
            return std::lgamma(m + x) - std::lgamma(x + 1.0) - std::lgamma(m) +
                   m * std::log(m / (m + d.rho)) + x * std::log(d.rho / (m + d.rho));
        }
        case Family::GHS: return ghs::log_density(f.r, d.theta, x);
    }
    return 0.0;
}

double density(const NefDistribution& d, double x) { return std::exp(log_density(d, x)); }

Moments moments(const NefDistribution& d) {
    return {d.rho, family_triple(d.family)(d.rho)};
}

double integration_scale(const NefDistribution& d) {
    const double sd = std::sqrt(moments(d).variance);
    double scale = 3.0 * sd + 2.0;
    if (d.family.tag == Family::GHS)
        scale = std::max(scale, 8.0 / (0.5 * M_PI - std::abs(d.theta)));
    return scale;
}

double raw_moment(const NefDistribution& d, int k) {
    if (k == 0) return 1.0;
    const auto m = moments(d);
    const double sd = std::sqrt(m.variance);
    if (d.family.discrete()) {
        const long long hi =
            d.family.tag == Family::Binomial
                ? d.family.kappa
                : static_cast<long long>(std::ceil(m.mean + 60.0 * sd + 60.0));
        double acc = 0.0;
        for (long long x = 0; x <= hi; ++x)
            acc += std::pow(static_cast<double>(x), k) * density(d, static_cast<double>(x));
        return acc;
    }
    auto f = [&](double x) { return std::pow(x, k) * density(d, x); };
    if (d.family.tag == Family::Gamma)
        return integrate_half_line(f, 0.0, m.mean + static_cast<double>(k) * sd, 1e-12);
    return integrate_real_line(f, m.mean,
                               integration_scale(d) + sd * static_cast<double>(k), 1e-12);
}

double sample_one(const NefDistribution& d, Rng& rng) {
    const auto& f = d.family;
    switch (f.tag) {
        case Family::Normal: return d.rho + std::sqrt(f.sigma2) * rng.normal();
        case Family::Poisson: return static_cast<double>(rng.poisson(d.rho));
        case Family::Gamma: return rng.gamma(f.shape2s) * (d.rho / f.shape2s);
        case Family::Binomial:
            return static_cast<double>(rng.binomial(f.kappa, d.rho / f.kappa));
        case Family::NegBinomial: {
            // Poisson-Gamma mixture: lambda ~ Gamma(2s, rho/2s)
            const double lambda = rng.gamma(f.shape2s) * (d.rho / f.shape2s);
            return static_cast<double>(rng.poisson(lambda));
        }
        case Family::GHS: {
            auto table = ghs::marginal_table(f.r, d.theta);
            return table->sample(rng.uniform());
        }
    }
    return 0.0;
}

std::vector<double> sample(const NefDistribution& d, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (auto& v : out) v = sample_one(d, rng);
    return out;
}

double ghs_mgf(double r, double theta, double t) { return ghs::mgf(r, theta, t); }

Classified classify_qvf(const QvfTriple& t) {
    Classified res;
    const double scale0 = std::max({std::abs(t.v2), std::abs(t.v1), std::abs(t.v0), 1.0});
    const double eps = 1e-9 * scale0;
    const double disc = t.v1 * t.v1 - 4.0 * t.v2 * t.v0;

    if (std::abs(t.v2) <= eps) {
        if (std::abs(t.v1) <= eps) {
            if (!(t.v0 > eps))
                throw Unclassifiable("constant variance must be positive");
            res.family = NefFamily::normal(t.v0);
            res.scale = 1.0;
            res.shift = 0.0;
            return res;
        }
        // affine image of Poisson: V = v1*rho + v0 = v1 * (canonical mean)
        res.family = NefFamily::poisson();
        res.scale = t.v1;
        res.shift = -t.v0 / t.v1;
        return res;
    }

    if (t.v2 > 0.0) {
        const double disc_eps = 1e-9 * std::max(t.v1 * t.v1 + std::abs(4.0 * t.v2 * t.v0), 1.0);
        if (std::abs(disc) <= disc_eps) {
            // perfect square: gamma, scale-free
            res.family = NefFamily::gamma(1.0 / t.v2);
            res.scale = 1.0;
            res.shift = -t.v1 / (2.0 * t.v2);
            return res;
        }
        if (disc < 0.0) {
            const double r = 1.0 / t.v2;
            res.family = NefFamily::ghs(r);
            res.shift = -t.v1 / (2.0 * t.v2);
            res.scale = std::sqrt((t.v0 - t.v2 * res.shift * res.shift) / r);
            return res;
        }
        res.family = NefFamily::neg_binomial(1.0 / t.v2);
        res.scale = std::sqrt(disc);
        res.shift = (res.scale - t.v1) / (2.0 * t.v2);
        return res;
    }

    // v2 < 0: binomial if -1/v2 normalizes to an integer kappa
    const double kappa_real = -1.0 / t.v2;
    const double kappa_round = std::round(kappa_real);
    if (!(kappa_round >= 1.0) ||
        std::abs(kappa_real - kappa_round) > 1e-6 * std::max(1.0, kappa_real))
        throw Unclassifiable("v2 < 0 but -1/v2 does not normalize to an integer kappa");
    if (!(disc > eps)) throw Unclassifiable("downward parabola with no positivity interval");
    const int kappa = static_cast<int>(kappa_round);
    res.family = NefFamily::binomial(kappa);
    res.scale = std::sqrt(disc);
    res.shift = (res.scale - t.v1) / (2.0 * t.v2);
    if (kappa == 1) res.warnings.push_back("excluded: a=0");
    return res;
}

}  // namespace qvlat::nef
