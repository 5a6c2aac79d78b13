#include "qvlat/hydro.hpp"

#include <cmath>
#include <complex>
#include <atomic>
#include <thread>

#include "qvlat/errors.hpp"

namespace qvlat::hydro {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// map replica indices over a small thread pool; results land in caller slots
void parallel_for_replicas(int replicas, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int r = 0; r < replicas; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= replicas) return;
                body(r);
            }
        });
    for (auto& th : pool) th.join();
}

}  // namespace

double basis_h(int z, double u) {
    if (z == 0) return 1.0;
    if (z > 0) return std::sqrt(2.0) * std::cos(kTwoPi * z * u);
    return std::sqrt(2.0) * std::sin(kTwoPi * (-z) * u);
}

double pair_empirical(const engine::Configuration& cfg,
                      const std::function<double(double)>& G) {
    double acc = 0.0;
    for (int x = 0; x < cfg.N; ++x)
        acc += cfg.eta[x] * G(static_cast<double>(x) / cfg.N);
    return acc / cfg.N;
}

std::vector<double> fourier_coeffs(const engine::Configuration& cfg, int z_max) {
    std::vector<double> out(2 * z_max + 1, 0.0);
    for (int z = -z_max; z <= z_max; ++z) {
        double acc = 0.0;
        for (int x = 0; x < cfg.N; ++x)
            acc += cfg.eta[x] * basis_h(z, static_cast<double>(x) / cfg.N);
        out[z + z_max] = acc / cfg.N;
    }
    return out;
}

double sobolev_norm_sq(const std::vector<double>& coeffs, double m) {
    if (!(m > 2.5)) throw DomainError("sobolev norm needs m > 5/2");
    const int z_max = (static_cast<int>(coeffs.size()) - 1) / 2;
    double acc = 0.0;
    for (int z = -z_max; z <= z_max; ++z) {
        const double gamma = 1.0 + 4.0 * M_PI * M_PI * z * z;
        acc += std::pow(gamma, -m) * coeffs[z + z_max] * coeffs[z + z_max];
    }
    return acc;
}

std::vector<double> discrete_heat(const std::vector<double>& rho0, double D,
                                  double t_macro) {
    const int N = static_cast<int>(rho0.size());
    std::vector<std::complex<double>> hat(N);
    for (int z = 0; z < N; ++z) {
        std::complex<double> acc = 0.0;
        for (int x = 0; x < N; ++x) {
            const double ang = -kTwoPi * z * x / N;
            acc += rho0[x] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        const double sn = std::sin(M_PI * z / N);
        hat[z] = acc * std::exp(-4.0 * D * N * static_cast<double>(N) * t_macro * sn * sn);
    }
    std::vector<double> out(N);
    for (int x = 0; x < N; ++x) {
        std::complex<double> acc = 0.0;
        for (int z = 0; z < N; ++z) {
            const double ang = kTwoPi * z * x / N;
            acc += hat[z] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[x] = acc.real() / N;
    }
    return out;
}

GradNormSource::GradNormSource(const std::vector<double>& rho0, double D) : D_(D) {
    N_ = static_cast<int>(rho0.size());
    mode_energy_.resize(N_);
    mode_rate_.resize(N_);
    for (int z = 0; z < N_; ++z) {
        std::complex<double> acc = 0.0;
        for (int x = 0; x < N_; ++x) {
            const double ang = -kTwoPi * z * x / N_;
            acc += rho0[x] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        const double sn = std::sin(M_PI * z / N_);
        mode_energy_[z] = std::norm(acc) * (4.0 * sn * sn) / N_;
        mode_rate_[z] = 4.0 * D * sn * sn;
    }
}

double GradNormSource::operator()(double tau_micro) const {
    double acc = 0.0;
    for (int z = 0; z < N_; ++z) {
        if (mode_energy_[z] == 0.0) continue;
        acc += mode_energy_[z] * std::exp(-2.0 * mode_rate_[z] * tau_micro);
    }
    return acc;
}

namespace {

class SnapshotRecorder : public engine::TrajectoryObserver {
  public:
    std::vector<std::vector<double>> recorded;
    void snapshot(double, const engine::Configuration& cfg) override {
        recorded.push_back(cfg.eta);
    }
};

}  // namespace

EnsembleSnapshots run_snapshots(const models::ModelSpec& m, int N,
                                const std::function<double(double)>& profile,
                                const std::vector<double>& times, int replicas,
                                std::uint64_t seed, int threads) {
    EnsembleSnapshots out;
    out.N = N;
    out.times = times;
    out.states.resize(replicas);
    const double T = times.empty() ? 0.0 : times.back();
    parallel_for_replicas(replicas, threads, [&](int r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        auto cfg = engine::init_product_profile(m, profile, N, rng);
        SnapshotRecorder rec;
        rec.times = times;
        engine::simulate(m, cfg, T, rng, &rec);
        out.states[r] = std::move(rec.recorded);
    });
    return out;
}

EnsembleSnapshots run_snapshots_from(const models::ModelSpec& m,
                                     const std::vector<double>& eta0,
                                     const std::vector<double>& times, int replicas,
                                     std::uint64_t seed, int threads) {
    EnsembleSnapshots out;
    out.N = static_cast<int>(eta0.size());
    out.times = times;
    out.states.resize(replicas);
    const double T = times.empty() ? 0.0 : times.back();
    parallel_for_replicas(replicas, threads, [&](int r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        engine::Configuration cfg;
        cfg.N = out.N;
        cfg.eta = eta0;
        cfg.total = cfg.recompute_total();
        SnapshotRecorder rec;
        rec.times = times;
        engine::simulate(m, cfg, T, rng, &rec);
        out.states[r] = std::move(rec.recorded);
    });
    return out;
}

ProfileStats profile_stats(const EnsembleSnapshots& snaps, const std::vector<double>& rho0,
                           double D) {
    const int N = snaps.N;
    const auto R = snaps.states.size();
    const auto T = snaps.times.size();
    ProfileStats st;
    st.mean.assign(T, std::vector<double>(N, 0.0));
    st.se.assign(T, std::vector<double>(N, 0.0));
    st.reference.resize(T);
    for (std::size_t t = 0; t < T; ++t) st.reference[t] = discrete_heat(rho0, D, snaps.times[t]);
    for (std::size_t t = 0; t < T; ++t) {
        for (int x = 0; x < N; ++x) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                const double v = snaps.states[r][t][x];
                s += v;
                s2 += v * v;
            }
            const double mean = s / static_cast<double>(R);
            const double var =
                std::max(0.0, (s2 - s * mean) / (static_cast<double>(R) - 1.0));
            st.mean[t][x] = mean;
            st.se[t][x] = std::sqrt(var / static_cast<double>(R));
            const double err = mean - st.reference[t][x];
            st.sup_err = std::max(st.sup_err, std::abs(err));
            st.l2_err += err * err / static_cast<double>(N * T);
            if (st.se[t][x] > 0.0)
                st.max_abs_z = std::max(st.max_abs_z, std::abs(err) / st.se[t][x]);
        }
    }
    st.l2_err = std::sqrt(st.l2_err);
    return st;
}

std::vector<double> phi_initial_deterministic(const std::vector<double>& eta0,
                                              const nef::QvfTriple& triple) {
    if (!(triple.v2 > -1.0)) throw DegenerateRecentering("phi recentering needs v2 > -1");
    const int N = static_cast<int>(eta0.size());
    std::vector<double> phi(N / 2 + 1, 0.0);
    double acc = 0.0;
    for (int x = 0; x < N; ++x)
        acc += eta0[x] * eta0[x] -
               ((triple.v2 + 1.0) * eta0[x] * eta0[x] + triple.v1 * eta0[x] + triple.v0);
    phi[0] = acc / (triple.v2 + 1.0);
    return phi;
}

CorrelationTrace phi_estimate(const EnsembleSnapshots& snaps,
                              const std::vector<double>& rho0,
                              const models::QuadraticCoeffs& qc,
                              const nef::QvfTriple& triple, std::uint64_t bootstrap_seed,
                              int bootstrap_resamples) {
    if (!(triple.v2 > -1.0)) throw DegenerateRecentering("phi recentering needs v2 > -1");
    const int N = snaps.N;
    const int K = N / 2;
    const auto R = snaps.states.size();
    const auto T = snaps.times.size();

    CorrelationTrace tr;
    tr.N = N;
    tr.times = snaps.times;
    tr.triple = triple;
    tr.D = qc.D;
    for (int i = 0; i <= K; ++i) tr.lags.push_back(i);
    tr.phi.assign(T, std::vector<double>(K + 1, 0.0));
    tr.se.assign(T, std::vector<double>(K + 1, 0.0));

    // per-replica lag sums U[r][t][i] = sum_x eta_x eta_{x+i}
    std::vector<std::vector<std::vector<double>>> U(
        R, std::vector<std::vector<double>>(T, std::vector<double>(K + 1, 0.0)));
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t t = 0; t < T; ++t) {
            const auto& eta = snaps.states[r][t];
            for (int i = 0; i <= K; ++i) {
                double acc = 0.0;
                for (int x = 0; x < N; ++x) acc += eta[x] * eta[(x + i) % N];
                U[r][t][i] = acc;
            }
        }

    // deterministic centering terms
    std::vector<std::vector<double>> C(T, std::vector<double>(K + 1, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        const auto rho = discrete_heat(rho0, qc.D, snaps.times[t]);
        tr.rho.push_back(rho);
        for (int i = 1; i <= K; ++i) {
            double acc = 0.0;
            for (int x = 0; x < N; ++x) acc += rho[x] * rho[(x + i) % N];
            C[t][i] = acc;
        }
        double acc0 = 0.0;
        for (int x = 0; x < N; ++x)
            acc0 += (triple.v2 + 1.0) * rho[x] * rho[x] + triple.v1 * rho[x] + triple.v0;
        C[t][0] = acc0;
    }

    auto reduce = [&](const std::vector<std::size_t>& idx, std::size_t t, int i) {
        double acc = 0.0;
        for (auto r : idx) acc += U[r][t][i];
        const double mean_u = acc / static_cast<double>(idx.size());
        const double centered = mean_u - C[t][i];
        return i == 0 ? centered / (triple.v2 + 1.0) : centered;
    };

    std::vector<std::size_t> all(R);
    for (std::size_t r = 0; r < R; ++r) all[r] = r;
    for (std::size_t t = 0; t < T; ++t)
        for (int i = 0; i <= K; ++i) tr.phi[t][i] = reduce(all, t, i);

    // replica bootstrap
    Rng rng(bootstrap_seed);
    std::vector<std::vector<std::vector<double>>> boot(
        T, std::vector<std::vector<double>>(K + 1));
    std::vector<std::size_t> idx(R);
    for (int b = 0; b < bootstrap_resamples; ++b) {
        for (std::size_t r = 0; r < R; ++r)
            idx[r] = static_cast<std::size_t>(rng.uniform() * static_cast<double>(R));
        for (std::size_t t = 0; t < T; ++t)
            for (int i = 0; i <= K; ++i) boot[t][i].push_back(reduce(idx, t, i));
    }
    for (std::size_t t = 0; t < T; ++t)
        for (int i = 0; i <= K; ++i) {
            const auto& v = boot[t][i];
            double s = 0.0, s2 = 0.0;
            for (double w : v) {
                s += w;
                s2 += w * w;
            }
            const double mean = s / v.size();
            tr.se[t][i] = std::sqrt(std::max(0.0, (s2 / v.size() - mean * mean)));
        }
    return tr;
}

TestFunction make_test_function(int N, const std::function<double(double)>& G) {
    TestFunction tf;
    tf.g.resize(N);
    tf.lap.resize(N);
    tf.grad_sq.resize(N);
    for (int x = 0; x < N; ++x) tf.g[x] = G(static_cast<double>(x) / N);
    const double n2 = static_cast<double>(N) * N;
    for (int x = 0; x < N; ++x) {
        const double gp = tf.g[(x + 1) % N];
        const double gm = tf.g[(x + N - 1) % N];
        tf.lap[x] = n2 * (gp + gm - 2.0 * tf.g[x]);
        tf.grad_sq[x] = n2 * (gp - tf.g[x]) * (gp - tf.g[x]);
        tf.grad_norm_sq += tf.grad_sq[x] / N;
    }
    return tf;
}

MartingaleObserver::MartingaleObserver(const TestFunction& tf,
                                       const models::QuadraticCoeffs& qc)
    : tf_(tf), qc_(qc) {}

double MartingaleObserver::bond_term(const engine::Configuration& cfg, int x) const {
    const double e0 = cfg.eta[x];
    const double e1 = cfg.eta[(x + 1) % cfg.N];
    const double quad = qc_.a * (e0 * e0 + e1 * e1) + qc_.b * e0 * e1 +
                        qc_.c * (e0 + e1) + qc_.d;
    return tf_.grad_sq[x] * (qc_.D * (e0 - e1) * (e0 - e1) - quad);
}

void MartingaleObserver::resync(const engine::Configuration& cfg) {
    const int N = cfg.N;
    pairing_ = 0.0;
    lap_pair_ = 0.0;
    qv_integrand_ = 0.0;
    bond_.assign(N, 0.0);
    for (int x = 0; x < N; ++x) {
        pairing_ += cfg.eta[x] * tf_.g[x];
        lap_pair_ += cfg.eta[x] * tf_.lap[x];
        bond_[x] = bond_term(cfg, x);
        qv_integrand_ += bond_[x];
    }
    pairing_ /= N;
    lap_pair_ /= N;
    qv_integrand_ /= static_cast<double>(N) * N;
}

void MartingaleObserver::start(const engine::Configuration& cfg) {
    resync(cfg);
    pairing0_ = pairing_;
    i_lap_ = i_qv_ = 0.0;
    m_.clear();
    int_qv_.clear();
}

void MartingaleObserver::hold(double dt, const engine::Configuration&) {
    i_lap_ += dt * lap_pair_;
    i_qv_ += dt * qv_integrand_;
}

void MartingaleObserver::transition(const engine::Configuration& cfg, int x, double old0,
                                    double old1, double new0, double new1) {
    const int N = cfg.N;
    const int y = (x + 1) % N;
    pairing_ += ((new0 - old0) * tf_.g[x] + (new1 - old1) * tf_.g[y]) / N;
    lap_pair_ += ((new0 - old0) * tf_.lap[x] + (new1 - old1) * tf_.lap[y]) / N;
    const double n2 = static_cast<double>(N) * N;
    for (int b : {(x + N - 1) % N, x, y}) {
        const double nb = bond_term(cfg, b);
        qv_integrand_ += (nb - bond_[b]) / n2;
        bond_[b] = nb;
    }
}

void MartingaleObserver::bulk_change(const engine::Configuration& cfg) {
    const double p0 = pairing0_;
    resync(cfg);
    pairing0_ = p0;
}

void MartingaleObserver::snapshot(double, const engine::Configuration& cfg) {
    // refresh running sums so incremental drift cannot accumulate
    const double p0 = pairing0_;
    resync(cfg);
    pairing0_ = p0;
    m_.push_back(pairing_ - pairing0_ - qc_.D * i_lap_);
    int_qv_.push_back(i_qv_);
}

MartingaleEnsemble run_martingale(const models::ModelSpec& m, int N,
                                  const std::function<double(double)>& profile,
                                  const TestFunction& tf, const std::vector<double>& times,
                                  int replicas, std::uint64_t seed, int threads) {
    MartingaleEnsemble ens;
    ens.times = times;
    ens.M.resize(replicas);
    ens.int_qv.resize(replicas);
    const auto qc = models::extract_quadratic_coeffs(m);
    const double T = times.empty() ? 0.0 : times.back();
    parallel_for_replicas(replicas, threads, [&](int r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        auto cfg = engine::init_product_profile(m, profile, N, rng);
        MartingaleObserver obs(tf, qc);
        obs.times = times;
        engine::simulate(m, cfg, T, rng, &obs);
        ens.M[r] = obs.martingale();
        ens.int_qv[r] = obs.integrated_qv();
    });
    return ens;
}

MartingaleStats martingale_stats(const MartingaleEnsemble& ens) {
    MartingaleStats st;
    st.times = ens.times;
    const auto R = ens.M.size();
    const auto T = ens.times.size();
    for (std::size_t t = 0; t < T; ++t) {
        double s = 0.0, s2 = 0.0, q = 0.0, q2 = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            s += ens.M[r][t];
            s2 += ens.M[r][t] * ens.M[r][t];
            q += ens.int_qv[r][t];
            q2 += ens.int_qv[r][t] * ens.int_qv[r][t];
        }
        const double mean = s / R;
        const double var = std::max(0.0, (s2 - s * mean) / (static_cast<double>(R) - 1.0));
        const double mean_q = q / R;
        const double var_q = std::max(0.0, (q2 - q * mean_q) / (static_cast<double>(R) - 1.0));
        st.mean_M.push_back(mean);
        st.se_mean_M.push_back(std::sqrt(var / R));
        st.var_M.push_back(var);
        st.se_var_M.push_back(var * std::sqrt(2.0 / (static_cast<double>(R) - 1.0)));
        st.mean_int_qv.push_back(mean_q);
        st.se_int_qv.push_back(std::sqrt(var_q / R));
    }
    return st;
}

double clamp_to_mean_domain(const nef::NefFamily& fam, double value) {
    switch (fam.support()) {
        case nef::Support::RealLine: return value;
        case nef::Support::HalfLine:
        case nef::Support::Naturals: return std::max(value, 0.05);
        case nef::Support::Range0K: {
            const double margin = 0.05 * fam.kappa;
            return std::min(std::max(value, margin), fam.kappa - margin);
        }
    }
    return value;
}

HydroResult hydro_convergence_experiment(const models::ModelSpec& m,
                                         const std::function<double(double)>& profile,
                                         const std::vector<int>& Ns,
                                         const std::vector<double>& times, int replicas,
                                         std::uint64_t seed, int threads) {
    const auto qc = models::extract_quadratic_coeffs(m);
    const auto fam = m.invariant_family();
    // the same clipped profile must feed both the initial draws and the
    // reference heat solution
    auto clipped = [&, profile](double u) {
        return clamp_to_mean_domain(fam, profile(u));
    };
    HydroResult res;
    res.model = m.name();
    res.Ns = Ns;
    res.times = times;
    for (std::size_t ni = 0; ni < Ns.size(); ++ni) {
        const int N = Ns[ni];
        auto snaps = run_snapshots(m, N, clipped, times, replicas,
                                   seed + 1000003ull * ni, threads);
        std::vector<double> rho0(N);
        for (int x = 0; x < N; ++x) rho0[x] = clipped(static_cast<double>(x) / N);
        res.profiles.push_back(profile_stats(snaps, rho0, qc.D));

        std::vector<double> fv(times.size(), 0.0), fvse(times.size(), 0.0);
        const auto R = snaps.states.size();
        for (std::size_t t = 0; t < times.size(); ++t) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (int x = 0; x < N; ++x)
                    acc += snaps.states[r][t][x] * basis_h(1, static_cast<double>(x) / N);
                acc /= N;
                s += acc;
                s2 += acc * acc;
            }
            const double mean = s / R;
            fv[t] = std::max(0.0, (s2 - s * mean) / (static_cast<double>(R) - 1.0));
            fvse[t] = fv[t] * std::sqrt(2.0 / (static_cast<double>(R) - 1.0));
        }
        res.fluct_var.push_back(fv);
        res.fluct_var_se.push_back(fvse);
    }
    return res;
}

}  // namespace qvlat::hydro
