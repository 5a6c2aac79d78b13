#include "qvlat/rwalk.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "qvlat/errors.hpp"

namespace qvlat::rwalk {

double WalkSpec::rate_up(int i) const {
    if (i == 0) return 4.0 * a;
    if (i == 1) return 2.0 * D;
    if (i >= K) return 0.0;
    return 2.0 * D;
}

double WalkSpec::rate_down(int i) const {
    if (i == 0) return 0.0;
    if (i == 1) return 2.0 * a * (v2 + 1.0);
    if (i == K) return p_N * D;
    return 2.0 * D;
}

WalkSpec build_walk(int N, double D, double a, double v2) {
    std::string why;
    if (!(N >= 4)) why += "N must be >= 4; ";
    if (!(D > 0.0)) why += "D must be positive; ";
    if (!(a > 0.0)) why += "a must be positive; ";
    if (!(v2 > -1.0)) why += "v2 must exceed -1; ";
    if (!why.empty()) throw InvalidWalk("build_walk: " + why);
    WalkSpec spec;
    spec.N = N;
    spec.D = D;
    spec.a = a;
    spec.v2 = v2;
    spec.K = N / 2;
    spec.p_N = (N % 2 == 0) ? 4 : 2;
    return spec;
}

Eigen::MatrixXd generator_matrix(const WalkSpec& spec) {
    const int n = spec.K + 1;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double up = spec.rate_up(i);
        const double down = spec.rate_down(i);
        if (i + 1 < n) L(i, i + 1) = up;
        if (i - 1 >= 0) L(i, i - 1) = down;
        L(i, i) = -(up + down);
    }
    return L;
}

std::vector<double> occupation_time_all(const WalkSpec& spec, double t_macro) {
    const int n = spec.K + 1;
    // Occupation probabilities from start i solve p' = L^T p, p(0) = e_i;
    // augment with y' = p_0 + p_1 so the time integral is computed by the
    // same matrix exponential instead of a quadrature.
    const Eigen::MatrixXd L = generator_matrix(spec);
    const double tau = t_macro * spec.N * spec.N;
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = L.transpose();
    aug(n, 0) = 1.0;
    if (n > 1) aug(n, 1) = 1.0;
    const Eigen::MatrixXd E = (aug * tau).exp();
    std::vector<double> out(n, 0.0);
    for (int start = 0; start < n; ++start) {
        const double y = E(n, start);
        if (!std::isfinite(y)) throw IntegrationFailure("occupation_time: expm overflow");
        out[start] = y / (static_cast<double>(spec.N) * spec.N);
    }
    return out;
}

double occupation_time(const WalkSpec& spec, int start, double t_macro) {
    if (start < 0 || start > spec.K) throw DomainError("occupation_time: start outside I_N");
    if (t_macro <= 0.0) return 0.0;
    return occupation_time_all(spec, t_macro)[start];
}

ScalingReport verify_scaling(double D, double a, double v2, const std::vector<int>& Ns,
                             double t_macro) {
    if (Ns.size() < 3) throw DomainError("verify_scaling needs at least 3 lattice sizes");
    int lo = Ns.front(), hi = Ns.front();
    for (int n : Ns) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    if (hi < 8 * lo) throw DomainError("verify_scaling: sizes must span a factor of 8");
    ScalingReport rep;
    rep.Ns = Ns;
    for (int N : Ns) {
        const auto spec = build_walk(N, D, a, v2);
        const auto occ = occupation_time_all(spec, t_macro);
        double worst = 0.0;
        for (double v : occ) worst = std::max(worst, v);
        rep.max_occupation.push_back(worst);
    }
    // least squares on log-log
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(Ns.size());
    for (std::size_t i = 0; i < Ns.size(); ++i) {
        const double x = std::log(static_cast<double>(Ns[i]));
        const double y = std::log(rep.max_occupation[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.pass = rep.slope >= -1.15 && rep.slope <= -0.85;
    return rep;
}

namespace {

// Thomas solve of (I - c A) x = rhs for tridiagonal A (the scaled walk
// generator); A given by sub/diag/super arrays.
void tridiag_solve(const std::vector<double>& sub, const std::vector<double>& diag,
                   const std::vector<double>& sup, std::vector<double> rhs,
                   std::vector<double>& x) {
    const std::size_t n = diag.size();
    std::vector<double> c(n, 0.0);
    double piv = diag[0];
    x.assign(n, 0.0);
    c[0] = sup[0] / piv;
    x[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - sub[i] * c[i - 1];
        c[i] = (i + 1 < n) ? sup[i] / piv : 0.0;
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
}

struct TrBdf2 {
    // y' = M y + s(t), M = N^2 L tridiagonal
    std::vector<double> sub, diag, sup;  // of M
    std::function<std::vector<double>(double)> source;

    std::vector<double> apply_m(const std::vector<double>& y) const {
        const std::size_t n = diag.size();
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = diag[i] * y[i];
            if (i > 0) acc += sub[i] * y[i - 1];
            if (i + 1 < n) acc += sup[i] * y[i + 1];
            out[i] = acc;
        }
        return out;
    }

    // one TR-BDF2 step of size h from (t, y)
    std::vector<double> step(double t, const std::vector<double>& y, double h) const {
        constexpr double gamma = 2.0 - 1.4142135623730951;
        const std::size_t n = diag.size();
        const auto f0 = rhs_at(t, y);
        // trapezoid to t + gamma h: (I - (gamma h/2) M) y_g = y + (gamma h/2)(f0 + s(t+gh))
        const double c1 = 0.5 * gamma * h;
        std::vector<double> b(n);
        const auto s1 = source(t + gamma * h);
        for (std::size_t i = 0; i < n; ++i) b[i] = y[i] + c1 * (f0[i] + s1[i]);
        std::vector<double> yg;
        solve_shifted(c1, b, yg);
        // BDF2: (I - c2 h M) y1 = (1/(gamma(2-gamma))) yg - ((1-gamma)^2/(gamma(2-gamma))) y
        //       + c2 h s(t+h)
        const double c2 = (1.0 - gamma) / (2.0 - gamma);
        const double w1 = 1.0 / (gamma * (2.0 - gamma));
        const double w0 = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
        const auto s2 = source(t + h);
        for (std::size_t i = 0; i < n; ++i)
            b[i] = w1 * yg[i] - w0 * y[i] + c2 * h * s2[i];
        std::vector<double> y1;
        solve_shifted(c2 * h, b, y1);
        return y1;
    }

    std::vector<double> rhs_at(double t, const std::vector<double>& y) const {
        auto out = apply_m(y);
        const auto s = source(t);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
        return out;
    }

    void solve_shifted(double c, const std::vector<double>& rhs,
                       std::vector<double>& x) const {
        const std::size_t n = diag.size();
        std::vector<double> d(n), lo(n), up(n);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = 1.0 - c * diag[i];
            lo[i] = -c * sub[i];
            up[i] = -c * sup[i];
        }
        tridiag_solve(lo, d, up, rhs, x);
    }
};

}  // namespace

std::vector<std::vector<double>> phi_ode(const WalkSpec& spec,
                                         const std::vector<double>& phi0,
                                         const std::function<double(double)>& grad_norm_micro,
                                         const std::vector<double>& out_times,
                                         double rel_tol) {
    const int n = spec.K + 1;
    if (static_cast<int>(phi0.size()) != n)
        throw DomainError("phi_ode: phi0 must have floor(N/2)+1 entries");
    const double n2 = static_cast<double>(spec.N) * spec.N;

    TrBdf2 stepper;
    stepper.sub.assign(n, 0.0);
    stepper.diag.assign(n, 0.0);
    stepper.sup.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double up = spec.rate_up(i);
        const double down = spec.rate_down(i);
        stepper.diag[i] = -n2 * (up + down);
        if (i + 1 < n) stepper.sup[i] = n2 * up;
        if (i > 0) stepper.sub[i] = n2 * down;
    }
    const double coef1 = spec.a * (spec.v2 + 1.0) - spec.D;
    const double coef0 = 2.0 * spec.D - 2.0 * spec.a;
    stepper.source = [&, n](double t_macro) {
        std::vector<double> s(n, 0.0);
        const double g = grad_norm_micro(t_macro * n2);
        s[0] = n2 * coef0 * g;
        if (n > 1) s[1] = n2 * coef1 * g;
        return s;
    };

    std::vector<std::vector<double>> out;
    std::vector<double> y = phi0;
    double t = 0.0;
    double h = 1.0 / (n2 * 8.0 * std::max(spec.D, spec.a));  // a few relaxation times
    long steps = 0;
    for (double t_out : out_times) {
        while (t < t_out - 1e-15) {
            if (++steps > 2000000) throw IntegrationFailure("phi_ode: too many steps");
            double hs = std::min(h, t_out - t);
            // step doubling error control; local error of the half-step
            // pair is (y1 - y2)/3 for the second-order scheme
            const auto y1 = stepper.step(t, y, hs);
            const auto yh = stepper.step(t, y, 0.5 * hs);
            auto y2 = stepper.step(t + 0.5 * hs, yh, 0.5 * hs);
            double err = 0.0, scale = 1e-12;
            for (int i = 0; i < n; ++i) {
                err = std::max(err, std::abs(y1[i] - y2[i]) / 3.0);
                scale = std::max(scale, std::abs(y2[i]));
            }
            const double tol = rel_tol * scale + 1e-14;
            if (err <= tol) {
                for (int i = 0; i < n; ++i) y2[i] += (y2[i] - y1[i]) / 3.0;
                y = y2;
                t += hs;
                const double grow = err > 0.0 ? std::cbrt(tol / err) : 2.0;
                h = hs * std::min(2.0, std::max(0.5, 0.9 * grow));
            } else {
                h = 0.5 * hs;
            }
        }
        out.push_back(y);
    }
    return out;
}

std::vector<double> propagate_expm(const WalkSpec& spec, const std::vector<double>& v0,
                                   double t_macro) {
    const int n = spec.K + 1;
    const Eigen::MatrixXd L = generator_matrix(spec);
    const Eigen::MatrixXd E =
        (L * (t_macro * static_cast<double>(spec.N) * spec.N)).exp();
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = v0[i];
    const Eigen::VectorXd w = E * v;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = w(i);
    return out;
}

}  // namespace qvlat::rwalk
