#pragma once

// Macroscopic observables on top of the engine: empirical-measure pairings
// against the trigonometric basis h_z, negative Sobolev norms, the spectral
// discrete heat solver, ensemble estimation of the two-point correlation
// phi(t, i), and the Dynkin martingale / quadratic variation diagnostics.

#include <functional>
#include <string>
#include <vector>

#include "qvlat/engine.hpp"
#include "qvlat/models.hpp"

namespace qvlat::hydro {

// h_0 = 1, h_z = sqrt2 cos(2 pi z u) for z > 0, sqrt2 sin(2 pi |z| u) for z < 0.
double basis_h(int z, double u);

double pair_empirical(const engine::Configuration& cfg,
                      const std::function<double(double)>& G);

// coefficients <pi, h_z> for z = -z_max..z_max (index z + z_max)
std::vector<double> fourier_coeffs(const engine::Configuration& cfg, int z_max);

// || . ||_{-m}^2 = sum gamma_z^{-m} <pi,h_z>^2, gamma_z = 1 + 4 pi^2 z^2.
// Requires m > 5/2.
double sobolev_norm_sq(const std::vector<double>& coeffs, double m);

// Spectral solution of d/dt rho = D Delta rho on the torus, macroscopic time
// (mode z decays by exp(-4 D N^2 t sin^2(pi z / N))).
std::vector<double> discrete_heat(const std::vector<double>& rho0, double D,
                                  double t_macro);

// squared l2 norm of the forward gradient of the heat solution at
// microscopic time tau, evaluated from the mode decomposition
class GradNormSource {
  public:
    GradNormSource(const std::vector<double>& rho0, double D);
    double operator()(double tau_micro) const;

  private:
    double D_;
    int N_;
    std::vector<double> mode_energy_;  // |c_z|^2 |e^{2pi i z/N}-1|^2 / N
    std::vector<double> mode_rate_;    // 4 D sin^2(pi z/N)
};

// ---- ensembles ----

struct EnsembleSnapshots {
    int N = 0;
    std::vector<double> times;
    // [replica][time][site]
    std::vector<std::vector<std::vector<double>>> states;
};

EnsembleSnapshots run_snapshots(const models::ModelSpec& m, int N,
                                const std::function<double(double)>& profile,
                                const std::vector<double>& times, int replicas,
                                std::uint64_t seed, int threads = 1);

// every replica started from the same fixed configuration
EnsembleSnapshots run_snapshots_from(const models::ModelSpec& m,
                                     const std::vector<double>& eta0,
                                     const std::vector<double>& times, int replicas,
                                     std::uint64_t seed, int threads = 1);

struct ProfileStats {
    // [time][site]
    std::vector<std::vector<double>> mean, se, reference;
    double max_abs_z = 0.0;  // worst |mean - reference| / se
    double sup_err = 0.0;
    double l2_err = 0.0;
};

ProfileStats profile_stats(const EnsembleSnapshots& snaps,
                           const std::vector<double>& rho0, double D);

struct CorrelationTrace {
    std::string model;
    int N = 0;
    std::vector<double> times;
    std::vector<int> lags;
    std::vector<std::vector<double>> phi;  // [time][lag]
    std::vector<std::vector<double>> se;
    std::vector<std::vector<double>> rho;  // [time][site] recentering profiles
    nef::QvfTriple triple;
    double D = 0.0;
};

// rho0 are the exact initial site means; recentering at lag 0 uses the
// variance triple (requires v2 > -1).
CorrelationTrace phi_estimate(const EnsembleSnapshots& snaps,
                              const std::vector<double>& rho0,
                              const models::QuadraticCoeffs& qc,
                              const nef::QvfTriple& triple, std::uint64_t bootstrap_seed,
                              int bootstrap_resamples = 200);

// initial phi for a deterministic start eta0 (phi(0,i>=1) = 0 by centering)
std::vector<double> phi_initial_deterministic(const std::vector<double>& eta0,
                                              const nef::QvfTriple& triple);

// ---- Dynkin martingale / quadratic variation ----

struct TestFunction {
    std::vector<double> g;        // G(x/N)
    std::vector<double> lap;      // N^2 (G((x+1)/N) + G((x-1)/N) - 2G(x/N))
    std::vector<double> grad_sq;  // N^2 (G((x+1)/N) - G(x/N))^2
    double grad_norm_sq = 0.0;    // (1/N) sum grad_sq
};

TestFunction make_test_function(int N, const std::function<double(double)>& G);

// per-replica Dynkin martingale along the trajectory; time integrals are
// exact between events
class MartingaleObserver : public engine::TrajectoryObserver {
  public:
    MartingaleObserver(const TestFunction& tf, const models::QuadraticCoeffs& qc);

    void start(const engine::Configuration&) override;
    void hold(double dt_macro, const engine::Configuration&) override;
    void transition(const engine::Configuration&, int x, double old0, double old1,
                    double new0, double new1) override;
    void bulk_change(const engine::Configuration&) override;
    void snapshot(double t, const engine::Configuration&) override;

    const std::vector<double>& martingale() const { return m_; }
    const std::vector<double>& integrated_qv() const { return int_qv_; }

  private:
    void resync(const engine::Configuration&);
    double bond_term(const engine::Configuration&, int x) const;

    TestFunction tf_;
    models::QuadraticCoeffs qc_;
    double pairing0_ = 0.0, pairing_ = 0.0, lap_pair_ = 0.0, qv_integrand_ = 0.0;
    double i_lap_ = 0.0, i_qv_ = 0.0;
    std::vector<double> bond_;
    std::vector<double> m_, int_qv_;
};

struct MartingaleEnsemble {
    std::vector<double> times;
    std::vector<std::vector<double>> M;       // [replica][time]
    std::vector<std::vector<double>> int_qv;  // [replica][time]
};

MartingaleEnsemble run_martingale(const models::ModelSpec& m, int N,
                                  const std::function<double(double)>& profile,
                                  const TestFunction& tf,
                                  const std::vector<double>& times, int replicas,
                                  std::uint64_t seed, int threads = 1);

struct MartingaleStats {
    std::vector<double> times;
    std::vector<double> mean_M, se_mean_M;
    std::vector<double> var_M, se_var_M;
    std::vector<double> mean_int_qv, se_int_qv;
};

MartingaleStats martingale_stats(const MartingaleEnsemble& ens);

// ---- whole convergence experiment ----

struct HydroResult {
    std::string model;
    std::vector<int> Ns;
    std::vector<double> times;
    std::vector<ProfileStats> profiles;              // per N
    std::vector<std::vector<double>> fluct_var;      // [N][time] of <pi, h_1>
    std::vector<std::vector<double>> fluct_var_se;   // asymptotic SE of the variance
    std::vector<MartingaleStats> martingale;         // per N; filled on request
};

// clip a mean value into the family mean domain with a 5% margin
double clamp_to_mean_domain(const nef::NefFamily& fam, double value);

HydroResult hydro_convergence_experiment(const models::ModelSpec& m,
                                         const std::function<double(double)>& profile,
                                         const std::vector<int>& Ns,
                                         const std::vector<double>& times, int replicas,
                                         std::uint64_t seed, int threads = 1);

}  // namespace qvlat::hydro
