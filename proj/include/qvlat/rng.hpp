#pragma once

// Self-contained random number generation. Simulation results must be
// bitwise reproducible across platforms and thread counts, so nothing here
// depends on std::<distribution> internals: the generator is xoshiro256++
// and every sampler is written out explicitly. Per-replica streams are
// derived from (seed, stream_index) through splitmix64, so replica r of a
// run is the same no matter how replicas are scheduled.

#include <bit>
#include <cmath>
#include <cstdint>

namespace qvlat {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t s = seed ^ (0x7b1dcdaf1f4ad5b5ULL * (stream + 1));
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on (0,1); never returns 0 so logs are safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Marsaglia polar method; caches the second variate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    // Binomial(n, 1/2) by popcount of fair coin flips.
    long long binomial_half(long long n) {
        long long k = 0;
        while (n >= 64) {
            k += std::popcount(next_u64());
            n -= 64;
        }
        if (n > 0) k += std::popcount(next_u64() >> (64 - n));
        return k;
    }

    // Binomial(n, p) by pmf inversion; intended for the small n of bond sums.
    long long binomial(long long n, double p) {
        if (p <= 0.0) return 0;
        if (p >= 1.0) return n;
        const double u = uniform();
        double pk = std::pow(1.0 - p, static_cast<double>(n));
        double cdf = pk;
        long long k = 0;
        while (cdf < u && k < n) {
            pk *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (p / (1.0 - p));
            cdf += pk;
            ++k;
        }
        return k;
    }

    // Poisson by Knuth's product-of-uniforms; fine for the modest means here.
    long long poisson(double mean) {
        long long k = 0;
        double residual = mean;
        while (residual > 16.0) {
            // split to avoid underflow of exp(-mean)
            const double g = gamma(16.0);
            if (g > residual) {
                // remaining mean conditioned on the gamma overshoot
                return k + binomial(15, residual / g);
            }
            residual -= g;
            k += 16;
        }
        const double limit = std::exp(-residual);
        double prod = uniform();
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return k;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace qvlat
