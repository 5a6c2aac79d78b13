#include "qvlat/ghs.hpp"

#include <algorithm>
#include <cmath>

#include "qvlat/errors.hpp"
#include "qvlat/quadrature.hpp"

namespace qvlat::ghs {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Lanczos g = 607/128, 15 coefficients (Godfrey's set, ~15 significant digits).
constexpr double kLanczosG = 607.0 / 128.0;
constexpr double kLanczosCoef[15] = {
    0.99999999999999709182,     57.156235665862923517,     -59.597960355475491248,
    14.136097974741747174,      -0.49191381609762019978,   0.33994649984811888699e-4,
    0.46523628927048575665e-4,  -0.98374475304879564677e-4, 0.15808870322491248884e-3,
    -0.21026444172410488319e-3, 0.21743961811521264320e-3, -0.16431810653676389022e-3,
    0.84418223983852743293e-4,  -0.26190838401581408670e-4, 0.36899182659531622704e-5};

std::complex<double> log_gamma_lanczos(std::complex<double> z) {
    // valid for Re z > 0
    const std::complex<double> zm1 = z - 1.0;
    std::complex<double> sum = kLanczosCoef[0];
    for (int k = 1; k < 15; ++k) sum += kLanczosCoef[k] / (zm1 + static_cast<double>(k));
    const std::complex<double> t = zm1 + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * kPi) + (zm1 + 0.5) * std::log(t) - t + std::log(sum);
}

// Stirling series with Bernoulli-number tail; argument pushed to Re z >= 10
// by the recurrence log Gamma(z) = log Gamma(z+1) - log z.
std::complex<double> log_gamma_stirling(std::complex<double> z) {
    static constexpr double kBern[] = {1.0 / 12,      -1.0 / 360,     1.0 / 1260,
                                       -1.0 / 1680,   1.0 / 1188,     -691.0 / 360360,
                                       1.0 / 156,     -3617.0 / 122400};
    std::complex<double> shift = 0.0;
    while (z.real() < 10.0) {
        shift -= std::log(z);
        z += 1.0;
    }
    std::complex<double> res =
        (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * kPi);
    const std::complex<double> z2 = z * z;
    std::complex<double> zp = z;
    for (double b : kBern) {
        res += b / zp;
        zp *= z2;
    }
    return res + shift;
}

}  // namespace

std::complex<double> log_gamma(std::complex<double> z) {
    if (z.real() <= 0.0) throw DomainError("ghs::log_gamma requires Re z > 0");
    if (std::abs(z.imag()) <= 20.0) return log_gamma_lanczos(z);
    return log_gamma_stirling(z);
}

double log_abs_gamma_sq(double r, double x) {
    return 2.0 * log_gamma(std::complex<double>(0.5 * r, 0.5 * x)).real();
}

double log_density(double r, double theta, double x) {
    if (!(r > 0.0)) throw DomainError("GHS shape r must be positive");
    if (!(std::abs(theta) < 0.5 * kPi)) throw DomainError("GHS tilt must satisfy |theta| < pi/2");
    const double lg_r = std::lgamma(r);
    return theta * x + r * std::log(std::cos(theta)) + (r - 2.0) * std::log(2.0) -
           std::log(kPi) - lg_r + log_abs_gamma_sq(r, x);
}

double density(double r, double theta, double x) {
    return std::exp(log_density(r, theta, x));
}

double mgf(double r, double theta, double t) {
    if (!(r > 0.0)) throw DomainError("GHS shape r must be positive");
    const double arg = theta + t;
    if (!(std::abs(arg) < 0.5 * kPi))
        throw DomainError("GHS mgf undefined: |theta + t| must be < pi/2");
    return std::exp(r * (std::log(std::cos(theta)) - std::log(std::cos(arg))));
}

InverseCdfTable::InverseCdfTable(const std::vector<double>& x,
                                 const std::vector<double>& log_pdf)
    : x_(x) {
    const std::size_t n = x.size();
    double lmax = log_pdf[0];
    for (double v : log_pdf) lmax = std::max(lmax, v);
    cdf_.assign(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        const double f0 = std::exp(log_pdf[k - 1] - lmax);
        const double f1 = std::exp(log_pdf[k] - lmax);
        cdf_[k] = cdf_[k - 1] + 0.5 * (f0 + f1) * (x[k] - x[k - 1]);
    }
    const double total = cdf_.back();
    for (auto& c : cdf_) c /= total;
}

double InverseCdfTable::sample(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return x_.front();
    if (it == cdf_.end()) return x_.back();
    const auto k = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[k - 1], c1 = cdf_[k];
    const double w = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
    return x_[k - 1] + w * (x_[k] - x_[k - 1]);
}

double InverseCdfTable::sample_blend(const InverseCdfTable& a, const InverseCdfTable& b,
                                     double w, double u) {
    return (1.0 - w) * a.sample(u) + w * b.sample(u);
}

namespace {

// Expand [lo, hi] around `center` until the log-density at both ends is far
// below the peak; the integrated tails are then < 1e-12 of the mass.
void expand_support(double center, double half_width0,
                    const std::function<double(double)>& log_pdf, double& lo, double& hi) {
    const double peak = log_pdf(center);
    const double drop = std::log(1e-16);
    lo = center - half_width0;
    hi = center + half_width0;
    while (log_pdf(lo) - peak > drop) lo = center - 2.0 * (center - lo);
    while (log_pdf(hi) - peak > drop) hi = center + 2.0 * (hi - center);
}

std::shared_ptr<const InverseCdfTable> build_table(
    const std::function<double(double)>& log_pdf, double center, double sigma,
    int nodes) {
    double lo, hi;
    expand_support(center, 8.0 * sigma + 4.0, log_pdf, lo, hi);
    std::vector<double> x(nodes), lp(nodes);
    for (int k = 0; k < nodes; ++k) {
        x[k] = lo + (hi - lo) * k / (nodes - 1);
        lp[k] = log_pdf(x[k]);
    }
    return std::make_shared<InverseCdfTable>(x, lp);
}

struct MarginalKey {
    double r, theta;
    bool operator==(const MarginalKey& o) const { return r == o.r && theta == o.theta; }
};
struct MarginalKeyHash {
    std::size_t operator()(const MarginalKey& k) const {
        std::hash<double> h;
        return h(k.r) * 1000003u ^ h(k.theta);
    }
};

}  // namespace

std::shared_ptr<const InverseCdfTable> marginal_table(double r, double theta) {
    static std::mutex mu;
    static std::unordered_map<MarginalKey, std::shared_ptr<const InverseCdfTable>,
                              MarginalKeyHash>
        cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find({r, theta});
        if (it != cache.end()) return it->second;
    }
    const double mean = r * std::tan(theta);
    const double sd = std::sqrt(r * std::tan(theta) * std::tan(theta) + r);
    auto lp = [r, theta](double x) { return log_density(r, theta, x); };
    auto table = build_table(lp, mean, sd, 4097);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(MarginalKey{r, theta}, table);
    return table;
}

ConditionalSampler::ConditionalSampler(double r, std::size_t cache_capacity)
    : r_(r), capacity_(cache_capacity) {
    if (!(r > 0.0)) throw DomainError("GHS shape r must be positive");
}

double ConditionalSampler::density(double s, double beta) const {
    // tilt-free: p_{r,0}(beta) p_{r,0}(s-beta) / p_{2r,0}(s)
    return std::exp(log_density(r_, 0.0, beta) + log_density(r_, 0.0, s - beta) -
                    log_density(2.0 * r_, 0.0, s));
}

std::shared_ptr<const InverseCdfTable> ConditionalSampler::table_at_grid(
    std::int64_t q) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(q);
        if (it != cache_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            return it->second.first;
        }
    }
    const double s = static_cast<double>(q) * 1e-3;
    const double r = r_;
    const double sigma = std::sqrt((s * s + 4.0 * r * r) / (4.0 * (2.0 * r + 1.0)));
    auto lp = [r, s](double w) {
        // density of w = beta - s/2, symmetric in w
        return log_density(r, 0.0, 0.5 * s + w) + log_density(r, 0.0, 0.5 * s - w);
    };
    auto table = build_table(lp, 0.0, sigma, 1025);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(q);
    if (it != cache_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.second);
        return it->second.first;
    }
    lru_.push_front(q);
    cache_.emplace(q, std::make_pair(table, lru_.begin()));
    if (cache_.size() > capacity_) {
        cache_.erase(lru_.back());
        lru_.pop_back();
    }
    return table;
}

double ConditionalSampler::sample(double s, double u) const {
    const double g = s * 1e3;
    const auto q0 = static_cast<std::int64_t>(std::floor(g));
    const double w = g - static_cast<double>(q0);
    const auto t0 = table_at_grid(q0);
    if (w < 1e-12) return 0.5 * s + t0->sample(u);
    const auto t1 = table_at_grid(q0 + 1);
    const double dw = InverseCdfTable::sample_blend(*t0, *t1, w, u);
    return 0.5 * s + dw;
}

}  // namespace qvlat::ghs
