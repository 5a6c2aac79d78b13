#include "qvlat/engine.hpp"

#include <algorithm>
#include <cmath>

#include "qvlat/errors.hpp"

namespace qvlat::engine {

using models::Kind;
using models::ModelSpec;

namespace {

// Fenwick tree over bond rates; bond i is (i, i+1 mod N).
class RateTree {
  public:
    explicit RateTree(int n) : n_(n), tree_(n + 1, 0.0), leaf_(n, 0.0) {}

    void set(int i, double v) {
        const double delta = v - leaf_[i];
        leaf_[i] = v;
        for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += delta;
    }

    double get(int i) const { return leaf_[i]; }

    double total() const {
        double s = 0.0;
        for (int k = n_; k > 0; k -= k & -k) s += tree_[k];
        return s;
    }

    // largest index with prefix sum <= target; returns a leaf index
    int find(double target) const {
        int pos = 0;
        int mask = 1;
        while ((mask << 1) <= n_) mask <<= 1;
        for (; mask > 0; mask >>= 1) {
            const int next = pos + mask;
            if (next <= n_ && tree_[next] < target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return std::min(pos, n_ - 1);
    }

    void rebuild() {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        std::vector<double> vals = leaf_;
        std::fill(leaf_.begin(), leaf_.end(), 0.0);
        for (int i = 0; i < n_; ++i) set(i, vals[i]);
    }

  private:
    int n_;
    std::vector<double> tree_;
    std::vector<double> leaf_;
};

double bond_rate(const ModelSpec& m, double e0, double e1) {
    return m.directed_rate(e0, e1) + m.directed_rate(e1, e0);
}

void check_support(const ModelSpec& m, double v) {
    switch (m.kind()) {
        case Kind::Redistribution:
        case Kind::GinzburgLandau: break;
        case Kind::IRW:
        case Kind::SIP:
        case Kind::Harmonic:
            if (v < 0.0) throw DomainError("negative occupation");
            break;
        case Kind::PEP:
            if (v < 0.0 || v > m.kappa()) throw DomainError("occupation outside {0..kappa}");
            break;
    }
}

void simulate_jump(const ModelSpec& m, Configuration& cfg, double tau_end, Rng& rng,
                   TrajectoryObserver* obs, const SimulateOptions& opt) {
    const int N = cfg.N;
    const bool redistribution = m.kind() == Kind::Redistribution;
    const bool harmonic = m.kind() == Kind::Harmonic;
    const double n2 = static_cast<double>(N) * N;

    RateTree tree(N);
    if (!redistribution)
        for (int i = 0; i < N; ++i)
            tree.set(i, bond_rate(m, cfg.eta[i], cfg.eta[(i + 1) % N]));

    std::size_t next_obs = 0;
    auto obs_times = obs ? obs->times : std::vector<double>{};
    double tau = 0.0;
    long long events = 0;

    auto emit_holds_until = [&](double tau_next) {
        if (obs) {
            while (next_obs < obs_times.size() && obs_times[next_obs] * n2 <= tau_next) {
                const double tau_obs = obs_times[next_obs] * n2;
                if (tau_obs > tau) obs->hold((tau_obs - tau) / n2, cfg);
                tau = tau_obs;
                obs->snapshot(obs_times[next_obs], cfg);
                ++next_obs;
            }
            if (tau_next > tau) obs->hold((tau_next - tau) / n2, cfg);
        }
        tau = tau_next;
    };

    for (;;) {
        const double total_rate = redistribution ? static_cast<double>(N) : tree.total();
        if (!(total_rate > 0.0)) {
            emit_holds_until(tau_end);
            break;
        }
        const double dt = rng.exponential(total_rate);
        if (tau + dt >= tau_end) {
            emit_holds_until(tau_end);
            break;
        }
        // select bond
        int x;
        double dir_u = 0.0;
        if (redistribution) {
            const double u = rng.uniform() * N;
            x = std::min(static_cast<int>(u), N - 1);
        } else {
            const double u = rng.uniform() * total_rate;
            x = tree.find(u);
            dir_u = rng.uniform();
        }
        const int y = (x + 1) % N;
        const double e0 = cfg.eta[x];
        const double e1 = cfg.eta[y];
        double n0 = e0, n1 = e1;

        if (redistribution) {
            auto [a, b] = m.kernel().thermalize(e0, e1, rng);
            n0 = a;
            n1 = b;
        } else {
            const double r01 = m.directed_rate(e0, e1);
            const double r10 = m.directed_rate(e1, e0);
            const double rb = r01 + r10;
            if (rb > opt.rate_cap)
                throw RateOverflow("bond rate " + std::to_string(rb) + " exceeds cap");
            if (!(rb > 0.0)) {  // stale zero-rate leaf hit by a float edge
                tree.set(x, bond_rate(m, e0, e1));
                continue;
            }
            const bool forward = dir_u * rb < r01;
            if (harmonic) {
                const double from = forward ? e0 : e1;
                const auto nfrom = static_cast<long long>(from);
                const auto pre = m.harmonic_prefix(nfrom);
                const double target = rng.uniform() * pre->back();
                const auto it = std::upper_bound(pre->begin(), pre->end(), target);
                const auto alpha = static_cast<double>((it - pre->begin()) + 1);
                n0 = forward ? e0 - alpha : e0 + alpha;
                n1 = forward ? e1 + alpha : e1 - alpha;
            } else {
                n0 = forward ? e0 - 1.0 : e0 + 1.0;
                n1 = forward ? e1 + 1.0 : e1 - 1.0;
            }
            check_support(m, n0);
            check_support(m, n1);
        }

        emit_holds_until(tau + dt);
        cfg.eta[x] = n0;
        cfg.eta[y] = n1;
        if (obs) obs->transition(cfg, x, e0, e1, n0, n1);

        if (!redistribution) {
            const int xm = (x + N - 1) % N;
            const int yp = (y + 1) % N;
            tree.set(xm, bond_rate(m, cfg.eta[xm], cfg.eta[x]));
            tree.set(x, bond_rate(m, cfg.eta[x], cfg.eta[y]));
            if (yp != xm) tree.set(y, bond_rate(m, cfg.eta[y], cfg.eta[yp]));
        }

        if (++events % 100000 == 0) {
            cfg.total = cfg.recompute_total();
            if (!redistribution && harmonic) tree.rebuild();
        }
    }
    cfg.total = cfg.recompute_total();
}

void simulate_gl(const ModelSpec& m, Configuration& cfg, double tau_end, Rng& rng,
                 TrajectoryObserver* obs, const SimulateOptions& opt) {
    const int N = cfg.N;
    const double n2 = static_cast<double>(N) * N;
    const double D = 0.5 / m.sigma2();
    double dt = opt.gl_dt_micro > 0.0 ? opt.gl_dt_micro
                                      : std::min(0.05 * m.sigma2(), 0.1);
    std::size_t next_obs = 0;
    auto obs_times = obs ? obs->times : std::vector<double>{};
    std::vector<double> xi(N), drift(N);
    double tau = 0.0;
    long long steps = 0;
    const double eps = 1e-12 * std::max(1.0, tau_end);
    for (;;) {
        // emit any observations due at the current time
        while (obs && next_obs < obs_times.size() &&
               obs_times[next_obs] * n2 <= tau + eps) {
            obs->snapshot(obs_times[next_obs], cfg);
            ++next_obs;
        }
        if (tau >= tau_end - eps) break;
        double step = std::min(dt, tau_end - tau);
        if (next_obs < obs_times.size()) {
            const double tau_obs = obs_times[next_obs] * n2;
            if (tau + step > tau_obs) step = tau_obs - tau;
        }
        if (step > 0.0) {
            if (obs) obs->hold(step / n2, cfg);
            const double sq = std::sqrt(step);
            for (int i = 0; i < N; ++i) xi[i] = sq * rng.normal();
            for (int i = 0; i < N; ++i) {
                const int l = (i + N - 1) % N, r = (i + 1) % N;
                drift[i] = D * (cfg.eta[l] + cfg.eta[r] - 2.0 * cfg.eta[i]);
            }
            for (int i = 0; i < N; ++i) {
                const int l = (i + N - 1) % N;
                cfg.eta[i] += step * drift[i] + (xi[l] - xi[i]);
            }
            if (obs) obs->bulk_change(cfg);
        }
        tau += step;
        if (++steps % 100000 == 0) cfg.total = cfg.recompute_total();
    }
    cfg.total = cfg.recompute_total();
}

}  // namespace

Configuration init_product(const ModelSpec& m, double rho, int N, Rng& rng) {
    return init_product_profile(m, [rho](double) { return rho; }, N, rng);
}

Configuration init_product_profile(const ModelSpec& m,
                                   const std::function<double(double)>& profile, int N,
                                   Rng& rng) {
    if (N < 3) throw DomainError("lattice needs N >= 3");
    Configuration cfg;
    cfg.N = N;
    cfg.eta.resize(N);
    for (int x = 0; x < N; ++x) {
        const auto d = nef::make_nef(m.invariant_family(), profile(static_cast<double>(x) / N));
        cfg.eta[x] = nef::sample_one(d, rng);
    }
    cfg.total = cfg.recompute_total();
    return cfg;
}

void simulate(const ModelSpec& m, Configuration& cfg, double T_macro, Rng& rng,
              TrajectoryObserver* obs, const SimulateOptions& opt) {
    if (T_macro < 0.0) throw DomainError("T must be nonnegative");
    if (obs) {
        for (std::size_t i = 1; i < obs->times.size(); ++i)
            if (obs->times[i] < obs->times[i - 1])
                throw DomainError("observation times must be sorted");
        obs->start(cfg);
    }
    // built as T * (N*N) so observer times t * n2 compare bit-exactly
    const double tau_end = T_macro * (static_cast<double>(cfg.N) * cfg.N);
    if (m.kind() == Kind::GinzburgLandau)
        simulate_gl(m, cfg, tau_end, rng, obs, opt);
    else
        simulate_jump(m, cfg, tau_end, rng, obs, opt);
}

// ---------------- exact fiber tools ----------------

long long Fiber::index_of(const std::vector<int>& state) const {
    std::uint64_t key = 0;
    const std::uint64_t radix = static_cast<std::uint64_t>(M) + 1;
    for (int v : state) key = key * radix + static_cast<std::uint64_t>(v);
    auto it = std::lower_bound(index_.begin(), index_.end(),
                               std::make_pair(key, static_cast<long long>(-1)));
    if (it == index_.end() || it->first != key) return -1;
    return it->second;
}

Fiber enumerate_fiber(const ModelSpec& m, int N, long long M, std::size_t cap) {
    if (!m.discrete_states()) throw DomainError("exact fiber requires a discrete model");
    int site_cap = static_cast<int>(M);
    if (m.kind() == Kind::PEP) site_cap = std::min<int>(site_cap, m.kappa());
    if (m.kind() == Kind::Redistribution &&
        m.invariant_family().tag == nef::Family::Binomial)
        site_cap = std::min<int>(site_cap, m.invariant_family().kappa);

    Fiber fiber;
    fiber.N = N;
    fiber.M = M;
    std::vector<int> state(N, 0);
    // recursive composition enumeration
    std::function<void(int, long long)> rec = [&](int pos, long long rest) {
        if (pos == N - 1) {
            if (rest <= site_cap) {
                state[pos] = static_cast<int>(rest);
                fiber.states.push_back(state);
                if (fiber.states.size() > cap)
                    throw FiberTooLarge("fiber exceeds cap of " + std::to_string(cap));
            }
            return;
        }
        const long long hi = std::min<long long>(site_cap, rest);
        for (long long v = 0; v <= hi; ++v) {
            state[pos] = static_cast<int>(v);
            rec(pos + 1, rest - v);
        }
    };
    rec(0, M);

    const std::uint64_t radix = static_cast<std::uint64_t>(M) + 1;
    fiber.index_.reserve(fiber.states.size());
    for (std::size_t i = 0; i < fiber.states.size(); ++i) {
        std::uint64_t key = 0;
        for (int v : fiber.states[i]) key = key * radix + static_cast<std::uint64_t>(v);
        fiber.index_.emplace_back(key, static_cast<long long>(i));
    }
    std::sort(fiber.index_.begin(), fiber.index_.end());
    return fiber;
}

SparseGenerator exact_generator(const ModelSpec& m, const Fiber& fiber) {
    SparseGenerator gen;
    gen.n = static_cast<long long>(fiber.states.size());
    gen.rows.resize(fiber.states.size());
    gen.diag.assign(fiber.states.size(), 0.0);
    const int N = fiber.N;

    std::vector<int> work;
    auto add_rate = [&](long long row, const std::vector<int>& src, int x, int y,
                        int new0, int new1, double rate) {
        if (rate <= 0.0) return;
        work = src;
        work[x] = new0;
        work[y] = new1;
        const long long col = fiber.index_of(work);
        if (col < 0) throw DomainError("exact_generator: jump leaves the fiber");
        if (col == row) return;
        gen.rows[row].emplace_back(col, rate);
        gen.diag[row] -= rate;
    };

    for (long long idx = 0; idx < gen.n; ++idx) {
        const auto& st = fiber.states[idx];
        for (int x = 0; x < N; ++x) {
            const int y = (x + 1) % N;
            const int e0 = st[x], e1 = st[y];
            const int s = e0 + e1;
            switch (m.kind()) {
                case Kind::Redistribution: {
                    const auto& k = m.kernel();
                    for (int beta = 0; beta <= s; ++beta) {
                        const double alpha = e0 - beta;
                        const double rate = k.density(e0, e1, alpha);
                        if (rate > 0.0 && beta != e0)
                            add_rate(idx, st, x, y, beta, s - beta, rate);
                    }
                    break;
                }
                case Kind::IRW:
                case Kind::PEP:
                case Kind::SIP: {
                    if (e0 >= 1)
                        add_rate(idx, st, x, y, e0 - 1, e1 + 1, m.directed_rate(e0, e1));
                    if (e1 >= 1)
                        add_rate(idx, st, x, y, e0 + 1, e1 - 1, m.directed_rate(e1, e0));
                    break;
                }
                case Kind::Harmonic: {
                    if (e0 >= 1) {
                        const auto pre = m.harmonic_prefix(e0);
                        for (int a = 1; a <= e0; ++a) {
                            const double c = (*pre)[a - 1] - (a > 1 ? (*pre)[a - 2] : 0.0);
                            add_rate(idx, st, x, y, e0 - a, e1 + a, 0.5 * c);
                        }
                    }
                    if (e1 >= 1) {
                        const auto pre = m.harmonic_prefix(e1);
                        for (int a = 1; a <= e1; ++a) {
                            const double c = (*pre)[a - 1] - (a > 1 ? (*pre)[a - 2] : 0.0);
                            add_rate(idx, st, x, y, e0 + a, e1 - a, 0.5 * c);
                        }
                    }
                    break;
                }
                case Kind::GinzburgLandau:
                    throw DomainError("exact_generator: diffusion has no finite fiber");
            }
        }
    }
    return gen;
}

std::vector<double> canonical_weights(const ModelSpec& m, const Fiber& fiber) {
    const auto marginal = m.invariant_marginal();
    std::vector<double> logw(fiber.states.size(), 0.0);
    double lmax = -1e300;
    for (std::size_t i = 0; i < fiber.states.size(); ++i) {
        double lw = 0.0;
        for (int v : fiber.states[i]) lw += nef::log_density(marginal, v);
        logw[i] = lw;
        lmax = std::max(lmax, lw);
    }
    std::vector<double> w(fiber.states.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(logw[i] - lmax);
        total += w[i];
    }
    for (auto& v : w) v /= total;
    return w;
}

double exact_stationarity_residual(const ModelSpec& m, int N, long long M) {
    const auto fiber = enumerate_fiber(m, N, M);
    const auto gen = exact_generator(m, fiber);
    const auto nu = canonical_weights(m, fiber);
    std::vector<double> out(nu.size(), 0.0);
    for (std::size_t row = 0; row < nu.size(); ++row) {
        out[row] += nu[row] * gen.diag[row];
        for (const auto& [col, rate] : gen.rows[row]) out[col] += nu[row] * rate;
    }
    double worst = 0.0;
    for (double v : out) worst = std::max(worst, std::abs(v));
    return worst;
}

std::vector<double> evolve_distribution(const SparseGenerator& gen,
                                        const std::vector<double>& mu0, double t_micro) {
    if (t_micro <= 0.0) return mu0;
    double lambda = 0.0;
    for (double d : gen.diag) lambda = std::max(lambda, -d);
    if (lambda <= 0.0) return mu0;
    lambda *= 1.05;
    if (lambda * t_micro > 500.0) {
        // split to keep the Poisson weights representable
        const auto half = evolve_distribution(gen, mu0, 0.5 * t_micro);
        return evolve_distribution(gen, half, 0.5 * t_micro);
    }
    const double a = lambda * t_micro;
    // Poisson(a) weights with tail below 1e-15
    const int kmax = static_cast<int>(a + 12.0 * std::sqrt(a + 1.0) + 40.0);
    std::vector<double> v = mu0, acc(mu0.size(), 0.0), next(mu0.size());
    double logw = -a;  // log weight of k = 0
    for (int k = 0;; ++k) {
        const double w = std::exp(logw);
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
        if (k >= kmax) break;
        // v <- v P with P = I + L / lambda (left multiplication)
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t row = 0; row < v.size(); ++row) {
            const double vr = v[row];
            if (vr == 0.0) continue;
            next[row] += vr * (1.0 + gen.diag[row] / lambda);
            for (const auto& [col, rate] : gen.rows[row]) next[col] += vr * rate / lambda;
        }
        v.swap(next);
        logw += std::log(a) - std::log(static_cast<double>(k + 1));
    }
    return acc;
}

double exact_expectation_evolution(const SparseGenerator& gen, const Fiber& fiber,
                                   const std::vector<double>& mu0,
                                   const std::function<double(const std::vector<int>&)>& f,
                                   double t_micro) {
    const auto mu = evolve_distribution(gen, mu0, t_micro);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu[i] != 0.0) acc += mu[i] * f(fiber.states[i]);
    return acc;
}

}  // namespace qvlat::engine
