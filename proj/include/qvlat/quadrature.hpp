#pragma once

// Adaptive Simpson quadrature. Integrals over the whole line are routed
// through the substitution x = center + scale*atanh(u), u in (-1,1), which
// turns the polynomial-times-sech tails of the GHS family into smooth,
// rapidly vanishing integrands on a finite interval.

#include <cmath>
#include <functional>

#include "qvlat/errors.hpp"

namespace qvlat {

namespace detail {

struct SimpsonState {
    const std::function<double(double)>& f;
    double tol;
    int max_depth;
    long evals = 0;
    long eval_budget;
};

inline double simpson_step(SimpsonState& st, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.f(lm);
    const double frm = st.f(rm);
    st.evals += 2;
    if (st.evals > st.eval_budget)
        throw QuadratureFailure("adaptive Simpson exceeded its evaluation budget");
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw QuadratureFailure("adaptive Simpson hit maximum depth");
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-10, int max_depth = 48,
                        long eval_budget = 2'000'000) {
    if (!(a < b)) return 0.0;
    detail::SimpsonState st{f, abs_tol, max_depth, 0, eval_budget};
    // seed with a few panels so narrow features near the middle are not missed
    const int panels = 8;
    double total = 0.0;
    double x0 = a;
    double f0 = f(x0);
    for (int k = 1; k <= panels; ++k) {
        const double x1 = a + (b - a) * k / panels;
        const double xm = 0.5 * (x0 + x1);
        const double f1 = f(x1);
        const double fm = f(xm);
        st.evals += 2;
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += detail::simpson_step(st, x0, x1, f0, fm, f1, whole, abs_tol / panels,
                                      max_depth);
        x0 = x1;
        f0 = f1;
    }
    return total;
}

// Integral of f over (a, b) through the cosine map x = a + (b-a)(1-cos pi u)/2.
// The Jacobian vanishes at both endpoints, which tames boundary jumps and
// integrable endpoint singularities (beta-type kernels with shape > 1/2).
inline double integrate_interval_smoothed(const std::function<double(double)>& f, double a,
                                          double b, double abs_tol = 1e-10) {
    if (!(a < b)) return 0.0;
    auto g = [&](double u) {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double x = a + (b - a) * 0.5 * (1.0 - std::cos(M_PI * u));
        const double jac = (b - a) * 0.5 * M_PI * std::sin(M_PI * u);
        return f(x) * jac;
    };
    return integrate(g, 0.0, 1.0, abs_tol, 60);
}

// Integral of f over all of R; center/scale should roughly match the mass.
inline double integrate_real_line(const std::function<double(double)>& f, double center,
                                  double scale, double abs_tol = 1e-10) {
    if (!(scale > 0.0)) throw DomainError("integrate_real_line: scale must be positive");
    auto g = [&](double u) {
        const double t = 1.0 - u * u;
        if (t <= 0.0) return 0.0;
        const double x = center + scale * std::atanh(u);
        const double v = f(x);
        return v * scale / t;
    };
    return integrate(g, -1.0, 1.0, abs_tol);
}

// Integral of f over (a, +inf). The substitution x = a + scale (t/(1-t))^2
// has a Jacobian vanishing at t = 0, which absorbs endpoint jumps and the
// integrable x^(g-1) singularities of small-shape gamma densities.
inline double integrate_half_line(const std::function<double(double)>& f, double a,
                                  double scale, double abs_tol = 1e-10) {
    if (!(scale > 0.0)) throw DomainError("integrate_half_line: scale must be positive");
    auto g = [&](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        const double w = t / (1.0 - t);
        const double x = a + scale * w * w;
        const double jac = scale * 2.0 * w / ((1.0 - t) * (1.0 - t));
        const double v = f(x);
        return v * jac;
    };
    return integrate(g, 0.0, 1.0, abs_tol, 60);
}

}  // namespace qvlat
