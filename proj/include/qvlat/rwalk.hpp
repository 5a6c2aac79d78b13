#pragma once

// The auxiliary random walk on the lag space I_N = {0, .., floor(N/2)} that
// closes the evolution of the two-point correlation phi. Rates:
//   i = 0:            up 4a
//   i = 1:            up 2D, down 2a(v2+1)
//   0,1 < i < K:      up 2D, down 2D
//   i = K = floor(N/2): down p_N D, p_N = 4 for even N, 2 for odd N.
// All occupation-time computations are deterministic linear algebra on the
// tridiagonal generator; no Monte Carlo enters.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace qvlat::rwalk {

struct WalkSpec {
    int N = 0;
    double D = 0.0;
    double a = 0.0;
    double v2 = 0.0;
    int p_N = 4;
    int K = 0;  // floor(N/2)

    double rate_up(int i) const;
    double rate_down(int i) const;
};

WalkSpec build_walk(int N, double D, double a, double v2);

// dense generator acting on functions of the lag (rows sum to zero)
Eigen::MatrixXd generator_matrix(const WalkSpec& spec);

// T_N(t, i) = int_0^t P_i(X_{s N^2} in {0,1}) ds, exact via an augmented
// matrix exponential.
double occupation_time(const WalkSpec& spec, int start, double t_macro);

// occupation time for every start in one sweep
std::vector<double> occupation_time_all(const WalkSpec& spec, double t_macro);

struct ScalingReport {
    std::vector<int> Ns;
    std::vector<double> max_occupation;  // max_i T(t, i) per N
    double slope = 0.0;                  // log-log least squares
    bool pass = false;                   // slope within [-1.15, -0.85]
};

ScalingReport verify_scaling(double D, double a, double v2, const std::vector<int>& Ns,
                             double t_macro);

// Integrates d/dt phi = N^2 (L phi + g(t)) in macroscopic time with the
// source g(t) = grad_norm(t N^2) * [(a(v2+1) - D) at i=1, (2D - 2a) at i=0].
// TR-BDF2 with adaptive step doubling; returns phi at each output time.
std::vector<std::vector<double>> phi_ode(const WalkSpec& spec,
                                         const std::vector<double>& phi0,
                                         const std::function<double(double)>& grad_norm_micro,
                                         const std::vector<double>& out_times,
                                         double rel_tol = 1e-9);

// exp(t_macro N^2 L) acting on an initial vector; cross-check path
std::vector<double> propagate_expm(const WalkSpec& spec, const std::vector<double>& v0,
                                   double t_macro);

}  // namespace qvlat::rwalk
