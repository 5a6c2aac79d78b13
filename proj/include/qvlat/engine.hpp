#pragma once

// Event-driven continuous-time simulation on the discrete torus under
// diffusive scaling: simulate(T) runs the microscopic clock to N^2 T.
// One replica is strictly sequential; ensembles parallelize over replicas
// with streams derived from (seed, replica). For small conserved fibers of
// the discrete models an exact generator is available as the ground-truth
// oracle.

#include <cstdint>
#include <functional>
#include <vector>

#include "qvlat/models.hpp"
#include "qvlat/rng.hpp"

namespace qvlat::engine {

struct Configuration {
    int N = 0;
    std::vector<double> eta;
    double total = 0.0;  // cached conserved sum

    double recompute_total() const {
        double s = 0.0;
        for (double v : eta) s += v;
        return s;
    }
};

// Hooks along a trajectory. `hold` reports the macroscopic time spent in the
// current configuration before the next change (piecewise-constant
// integrals are exact this way); `transition` reports a bond event at
// (x, x+1); `bulk_change` is emitted by the diffusion integrator instead.
class TrajectoryObserver {
  public:
    virtual ~TrajectoryObserver() = default;
    virtual void start(const Configuration&) {}
    virtual void snapshot(double /*t_macro*/, const Configuration&) {}
    virtual void hold(double /*dt_macro*/, const Configuration&) {}
    virtual void transition(const Configuration&, int /*x*/, double /*old0*/,
                            double /*old1*/, double /*new0*/, double /*new1*/) {}
    virtual void bulk_change(const Configuration&) {}

    std::vector<double> times;  // sorted macroscopic observation times
};

Configuration init_product(const models::ModelSpec& m, double rho, int N, Rng& rng);

// Site x drawn with mean profile(x / N).
Configuration init_product_profile(const models::ModelSpec& m,
                                   const std::function<double(double)>& profile, int N,
                                   Rng& rng);

struct SimulateOptions {
    double rate_cap = 1e12;
    double gl_dt_micro = 0.0;  // 0: use min(0.05 sigma2, 0.1)
};

void simulate(const models::ModelSpec& m, Configuration& cfg, double T_macro, Rng& rng,
              TrajectoryObserver* obs = nullptr, const SimulateOptions& opt = {});

// ---- exact fiber tools (discrete models) ----

struct Fiber {
    int N = 0;
    long long M = 0;
    std::vector<std::vector<int>> states;
    long long index_of(const std::vector<int>& state) const;  // -1 if absent

  private:
    friend Fiber enumerate_fiber(const models::ModelSpec&, int, long long, std::size_t);
    mutable std::vector<std::pair<std::uint64_t, long long>> index_;  // sorted keys
};

Fiber enumerate_fiber(const models::ModelSpec& m, int N, long long M,
                      std::size_t cap = 200000);

struct SparseGenerator {
    long long n = 0;
    std::vector<std::vector<std::pair<long long, double>>> rows;  // off-diagonal
    std::vector<double> diag;
};

SparseGenerator exact_generator(const models::ModelSpec& m, const Fiber& fiber);

// sup norm of nu_can L where nu_can is the conditioned product measure.
double exact_stationarity_residual(const models::ModelSpec& m, int N, long long M);

// mu(t) = mu0 exp(t L) by uniformization; returns E[f(eta(t_micro))].
double exact_expectation_evolution(const SparseGenerator& gen, const Fiber& fiber,
                                   const std::vector<double>& mu0,
                                   const std::function<double(const std::vector<int>&)>& f,
                                   double t_micro);

// evolved distribution itself (row vector mu0 exp(t L))
std::vector<double> evolve_distribution(const SparseGenerator& gen,
                                        const std::vector<double>& mu0, double t_micro);

// conditioned product weights on the fiber, normalized
std::vector<double> canonical_weights(const models::ModelSpec& m, const Fiber& fiber);

}  // namespace qvlat::engine
