#include "qvlat/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <mutex>

#include "qvlat/errors.hpp"
#include "qvlat/rng.hpp"

namespace qvlat::models {

using nef::Family;
using nef::NefFamily;

struct ModelSpec::HarmonicCache {
    std::mutex mu;
    std::vector<std::shared_ptr<const std::vector<double>>> prefix;  // by n
};

ModelSpec ModelSpec::redistribution(const NefFamily& family, double rho) {
    ModelSpec m;
    m.kind_ = Kind::Redistribution;
    m.inv_family_ = family;
    m.rho_ = nef::make_nef(family, rho).rho;
    m.kernel_ = std::make_shared<kernels::BondKernel>(family);
    return m;
}

ModelSpec ModelSpec::irw(double rho) {
    ModelSpec m;
    m.kind_ = Kind::IRW;
    m.inv_family_ = NefFamily::poisson();
    m.rho_ = nef::make_nef(m.inv_family_, rho).rho;
    return m;
}

ModelSpec ModelSpec::pep(int kappa, double rho) {
    if (kappa < 2) throw DomainError("PEP requires kappa >= 2 (kappa = 1 has a = 0)");
    ModelSpec m;
    m.kind_ = Kind::PEP;
    m.kappa_ = kappa;
    m.inv_family_ = NefFamily::binomial(kappa);
    m.rho_ = nef::make_nef(m.inv_family_, rho).rho;
    return m;
}

ModelSpec ModelSpec::sip(double shape2s, double rho) {
    ModelSpec m;
    m.kind_ = Kind::SIP;
    m.shape2s_ = shape2s;
    m.inv_family_ = NefFamily::neg_binomial(shape2s);
    m.rho_ = nef::make_nef(m.inv_family_, rho).rho;
    return m;
}

ModelSpec ModelSpec::harmonic(double shape2s, double rho) {
    ModelSpec m;
    m.kind_ = Kind::Harmonic;
    m.shape2s_ = shape2s;
    m.inv_family_ = NefFamily::neg_binomial(shape2s);
    m.rho_ = nef::make_nef(m.inv_family_, rho).rho;
    m.harm_cache_ = std::make_shared<HarmonicCache>();
    return m;
}

ModelSpec ModelSpec::ginzburg_landau(double sigma2, double rho) {
    ModelSpec m;
    m.kind_ = Kind::GinzburgLandau;
    m.sigma2_ = sigma2;
    m.inv_family_ = NefFamily::normal(sigma2);
    m.rho_ = rho;
    return m;
}

nef::NefDistribution ModelSpec::invariant_marginal() const {
    return nef::make_nef(inv_family_, rho_);
}

const kernels::BondKernel& ModelSpec::kernel() const {
    if (!kernel_) throw DomainError("model has no redistribution kernel");
    return *kernel_;
}

bool ModelSpec::discrete_states() const {
    switch (kind_) {
        case Kind::Redistribution: return inv_family_.discrete();
        case Kind::IRW:
        case Kind::PEP:
        case Kind::SIP:
        case Kind::Harmonic: return true;
        case Kind::GinzburgLandau: return false;
    }
    return false;
}

bool ModelSpec::exact_arithmetic() const {
    return !(kind_ == Kind::Redistribution && inv_family_.tag == Family::GHS);
}

std::string ModelSpec::name() const {
    switch (kind_) {
        case Kind::Redistribution: return "redistribution-" + inv_family_.name();
        case Kind::IRW: return "irw";
        case Kind::PEP: return "pep" + std::to_string(kappa_);
        case Kind::SIP: return "sip" + std::to_string(shape2s_);
        case Kind::Harmonic: return "harmonic" + std::to_string(shape2s_);
        case Kind::GinzburgLandau: return "gl" + std::to_string(sigma2_);
    }
    return "?";
}

double ModelSpec::directed_rate(double e_from, double e_to) const {
    switch (kind_) {
        case Kind::IRW: return 0.5 * e_from;
        case Kind::PEP: return 0.5 * e_from * (kappa_ - e_to);
        case Kind::SIP: return 0.5 * e_from * (shape2s_ + e_to);
        case Kind::Harmonic: return 0.5 * harmonic_total_rate(static_cast<long long>(e_from));
        default: throw DomainError("directed_rate: not a particle kind");
    }
}

std::shared_ptr<const std::vector<double>> ModelSpec::harmonic_prefix(long long n) const {
    if (kind_ != Kind::Harmonic) throw DomainError("harmonic_prefix: wrong kind");
    std::lock_guard<std::mutex> lock(harm_cache_->mu);
    auto& slots = harm_cache_->prefix;
    if (slots.size() <= static_cast<std::size_t>(n))
        slots.resize(static_cast<std::size_t>(n) + 1);
    auto& slot = slots[static_cast<std::size_t>(n)];
    if (!slot && n >= 1) {
        // c_alpha(n) = Gamma(n+1)Gamma(n-alpha+2s) / (alpha Gamma(n-alpha+1)Gamma(n+2s))
        auto pre = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
        const double m = shape2s_;
        const double base = std::lgamma(n + 1.0) - std::lgamma(n + m);
        double acc = 0.0;
        for (long long alpha = 1; alpha <= n; ++alpha) {
            const double na = static_cast<double>(n - alpha);
            const double c =
                std::exp(base + std::lgamma(na + m) - std::lgamma(na + 1.0)) /
                static_cast<double>(alpha);
            acc += c;
            (*pre)[static_cast<std::size_t>(alpha - 1)] = acc;
        }
        slot = pre;
    }
    if (!slot) slot = std::make_shared<std::vector<double>>();
    return slot;
}

double ModelSpec::harmonic_total_rate(long long n) const {
    if (n <= 0) return 0.0;
    return harmonic_prefix(n)->back();
}

double ModelSpec::bond_apply(const Poly2& f, double e0, double e1) const {
    switch (kind_) {
        case Kind::Redistribution: {
            const double s = e0 + e1;
            if (!kernel_->admissible(e0, e1))
                throw DomainError("bond_apply: inadmissible states");
            return kernel_->conditional_expectation(s, f) - f.eval(e0, e1);
        }
        case Kind::IRW:
        case Kind::PEP:
        case Kind::SIP: {
            const double f0 = f.eval(e0, e1);
            double acc = 0.0;
            if (e0 >= 1.0)
                acc += directed_rate(e0, e1) * (f.eval(e0 - 1.0, e1 + 1.0) - f0);
            if (e1 >= 1.0)
                acc += directed_rate(e1, e0) * (f.eval(e0 + 1.0, e1 - 1.0) - f0);
            return acc;
        }
        case Kind::Harmonic: {
            const double f0 = f.eval(e0, e1);
            double acc = 0.0;
            const auto n0 = static_cast<long long>(e0);
            const auto n1 = static_cast<long long>(e1);
            if (n0 >= 1) {
                const auto pre = harmonic_prefix(n0);
                for (long long a = 1; a <= n0; ++a) {
                    const double c = (*pre)[a - 1] - (a > 1 ? (*pre)[a - 2] : 0.0);
                    acc += 0.5 * c * (f.eval(e0 - a, e1 + a) - f0);
                }
            }
            if (n1 >= 1) {
                const auto pre = harmonic_prefix(n1);
                for (long long a = 1; a <= n1; ++a) {
                    const double c = (*pre)[a - 1] - (a > 1 ? (*pre)[a - 2] : 0.0);
                    acc += 0.5 * c * (f.eval(e0 + a, e1 - a) - f0);
                }
            }
            return acc;
        }
        case Kind::GinzburgLandau: {
            const Poly2 g = f.d1() - f.d0();
            const Poly2 gg = g.d1() - g.d0();
            return 0.5 * gg.eval(e0, e1) -
                   (0.5 / sigma2_) * (e1 - e0) * g.eval(e0, e1);
        }
    }
    return 0.0;
}

std::vector<std::pair<double, double>> ModelSpec::evaluation_grid() const {
    std::vector<std::pair<double, double>> grid;
    if (discrete_states()) {
        int cap = 6;
        if (kind_ == Kind::PEP) cap = std::min(cap, kappa_);
        if (kind_ == Kind::Redistribution && inv_family_.tag == Family::Binomial)
            cap = std::min(cap, inv_family_.kappa);
        for (int i = 0; i <= cap; ++i)
            for (int j = 0; j <= cap; ++j) grid.emplace_back(i, j);
        return grid;
    }
    const bool positive = kind_ == Kind::Redistribution && inv_family_.tag == Family::Gamma;
    // Gauss-Legendre nodes on [-1,1], tensorized and mapped into the state space
    static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                    0.5384693101056831, 0.9061798459386640};
    const double center = rho_;
    const double width = positive ? 0.9 * rho_ : 2.5;
    for (double ni : nodes)
        for (double nj : nodes)
            grid.emplace_back(center + width * ni, center + width * nj);
    return grid;
}

namespace {

double lsq_fit(const std::vector<std::pair<double, double>>& grid,
               const std::vector<double>& values,
               const std::vector<Poly2>& basis, std::vector<double>& coef) {
    const auto npts = static_cast<Eigen::Index>(grid.size());
    const auto nb = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd A(npts, nb);
    Eigen::VectorXd y(npts);
    for (Eigen::Index i = 0; i < npts; ++i) {
        for (Eigen::Index j = 0; j < nb; ++j)
            A(i, j) = basis[j].eval(grid[i].first, grid[i].second);
        y(i) = values[i];
    }
    Eigen::VectorXd x = A.colPivHouseholderQr().solve(y);
    coef.assign(x.data(), x.data() + nb);
    return (A * x - y).cwiseAbs().maxCoeff();
}

}  // namespace

LinearCoeffs extract_linear_coeffs(const ModelSpec& m) {
    const auto grid = m.evaluation_grid();
    const Poly2 f = Poly2::x0();
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        vals[i] = m.bond_apply(f, grid[i].first, grid[i].second);
    std::vector<double> coef;
    lsq_fit(grid, vals, {Poly2::x0(), Poly2::x1(), Poly2::constant(1.0)}, coef);
    LinearCoeffs lc{coef[0], coef[1], coef[2], -coef[0]};
    const double tol = m.exact_arithmetic() ? 1e-10 : 1e-7;
    if (std::abs(lc.r) > tol || std::abs(lc.p + lc.q) > tol)
        throw NonGradient(m.name() + ": linear action is not of gradient form (r = " +
                          std::to_string(lc.r) + ", p+q = " + std::to_string(lc.p + lc.q) +
                          ")");
    return lc;
}

QuadraticCoeffs extract_quadratic_coeffs(const ModelSpec& m) {
    const auto lc = extract_linear_coeffs(m);
    const auto grid = m.evaluation_grid();
    const Poly2 f = Poly2::x0() * Poly2::x1();
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        vals[i] = m.bond_apply(f, grid[i].first, grid[i].second);
    const Poly2 sym_sq = Poly2::x0() * Poly2::x0() + Poly2::x1() * Poly2::x1();
    const Poly2 cross = Poly2::x0() * Poly2::x1();
    const Poly2 sum = Poly2::x0() + Poly2::x1();
    std::vector<double> coef;
    const double residual = lsq_fit(grid, vals, {sym_sq, cross, sum, Poly2::constant(1.0)},
                                    coef);
    QuadraticCoeffs qc;
    qc.p = lc.p;
    qc.q = lc.q;
    qc.r = lc.r;
    qc.D = lc.D;
    qc.a = coef[0];
    qc.b = coef[1];
    qc.c = coef[2];
    qc.d = coef[3];
    qc.residual = residual;
    const double tol = m.exact_arithmetic() ? 1e-10 : 1e-6;
    if (residual > tol)
        throw NotDegreePreserving(m.name() + ": quadratic closure residual " +
                                  std::to_string(residual));
    if (std::abs(qc.a) <= 1e-12)
        throw Degenerate(m.name() + ": a vanishes (Bernoulli-type exclusion)");
    return qc;
}

nef::QvfTriple qvf_from_coeffs(const QuadraticCoeffs& qc) {
    if (qc.a == 0.0) throw Degenerate("qvf_from_coeffs: a = 0");
    return {-qc.b / (2.0 * qc.a) - 1.0, -qc.c / qc.a, -qc.d / (2.0 * qc.a)};
}

Poly2 bond_action_on_quadratic(const QuadraticCoeffs& qc, const Poly2& f) {
    if (f.degree() > 2) throw DomainError("bond_action_on_quadratic: degree > 2");
    const Poly2 x0 = Poly2::x0(), x1 = Poly2::x1();
    const Poly2 lin0 = (x1 - x0) * qc.D;  // L eta_0
    const Poly2 lin1 = (x0 - x1) * qc.D;  // L eta_1
    const Poly2 lcross = (x0 * x0 + x1 * x1) * qc.a + (x0 * x1) * qc.b +
                         (x0 + x1) * qc.c + Poly2::constant(qc.d);
    // L eta_0^2 = (eta_0+eta_1) L eta_0 - L(eta_0 eta_1), by the A2 identity
    const Poly2 lsq0 = (x0 + x1) * lin0 - lcross;
    const Poly2 lsq1 = (x0 + x1) * lin1 - lcross;
    Poly2 out;
    out = out + lin0 * f.at(1, 0) + lin1 * f.at(0, 1) + lcross * f.at(1, 1) +
          lsq0 * f.at(2, 0) + lsq1 * f.at(0, 2);
    return out;
}

bool AssumptionReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string AssumptionReport::summary() const {
    std::string s;
    for (const auto& c : checks) {
        s += (c.pass ? "pass  " : "FAIL  ");
        s += c.name + "  |.| = " + std::to_string(c.magnitude) +
             " (tol " + std::to_string(c.tolerance) + ")\n";
    }
    return s;
}

AssumptionReport verify_assumptions(const ModelSpec& m, double tol_scale) {
    AssumptionReport rep;
    const auto grid = m.evaluation_grid();
    const double base_tol = (m.exact_arithmetic() ? 1e-10 : 1e-7) * tol_scale;

    auto max_over_grid = [&](auto&& fn) {
        double worst = 0.0;
        for (const auto& [e0, e1] : grid) worst = std::max(worst, std::abs(fn(e0, e1)));
        return worst;
    };
    auto push = [&](const std::string& name, double mag, double tol) {
        rep.checks.push_back({name, mag, tol, mag <= tol});
    };

    // the bond operator annihilates constants
    const Poly2 one = Poly2::constant(1.0);
    push("constants are in the kernel",
         max_over_grid([&](double a, double b) { return m.bond_apply(one, a, b); }),
         base_tol);

    // conservation of the bond sum
    const Poly2 sum = Poly2::x0() + Poly2::x1();
    push("bond sum conserved",
         max_over_grid([&](double a, double b) { return m.bond_apply(sum, a, b); }),
         base_tol);

    // L commutes with the bond swap
    {
        double worst = 0.0;
        for (const Poly2& f : {Poly2::x0(), Poly2::x0() * Poly2::x0(),
                               Poly2::x0() * Poly2::x1()}) {
            const Poly2 fs = f.swapped();
            worst = std::max(worst, max_over_grid([&](double a, double b) {
                        return m.bond_apply(f, a, b) - m.bond_apply(fs, b, a);
                    }));
        }
        push("bond swap symmetry", worst, base_tol);
    }

    // functions of the conserved sum factor out of the bond action
    {
        Rng rng(20240811u);
        Poly2 F;  // random cubic polynomial of eta0 + eta1
        {
            const Poly2 s1 = sum;
            const Poly2 s2 = s1 * s1;
            const Poly2 s3 = s2 * s1;
            F = Poly2::constant(rng.uniform(-1.0, 1.0)) + s1 * rng.uniform(-1.0, 1.0) +
                s2 * rng.uniform(-1.0, 1.0) + s3 * rng.uniform(-1.0, 1.0);
        }
        double worst = 0.0;
        for (const Poly2& G : {Poly2::x0(), Poly2::x0() * Poly2::x0()}) {
            const Poly2 FG = F * G;
            worst = std::max(worst, max_over_grid([&](double a, double b) {
                        return m.bond_apply(FG, a, b) -
                               F.eval(a, b) * m.bond_apply(G, a, b);
                    }));
        }
        // scale: F G takes values ~ 10^3 on the grid for degree-5 arguments
        push("conserved-sum factors commute", worst, 1e3 * base_tol);
    }

    // gradient form and exact quadratic closure
    try {
        const auto qc = extract_quadratic_coeffs(m);
        push("gradient form: |r|", std::abs(qc.r), m.exact_arithmetic() ? 1e-10 : 1e-7);
        push("gradient form: |p+q|", std::abs(qc.p + qc.q),
             m.exact_arithmetic() ? 1e-10 : 1e-7);
        push("quadratic closure residual", qc.residual,
             m.exact_arithmetic() ? 1e-10 : 1e-6);

        // Dirichlet-form spot check with random quadratic F
        {
            Rng rng(911u);
            const auto marginal = m.invariant_marginal();
            double mom[5];
            for (int k = 0; k <= 4; ++k) mom[k] = nef::raw_moment(marginal, k);
            double violation = 0.0;
            for (int trial = 0; trial < 8; ++trial) {
                Poly2 F;
                for (int i = 0; i <= 2; ++i)
                    for (int j = 0; i + j <= 2; ++j) F.at(i, j) = rng.uniform(-1.0, 1.0);
                const Poly2 FLF = F * bond_action_on_quadratic(qc, F);
                double e_flf = 0.0;
                for (int i = 0; i <= 4; ++i)
                    for (int j = 0; i + j <= 4; ++j)
                        if (FLF.at(i, j) != 0.0) e_flf += FLF.at(i, j) * mom[i] * mom[j];
                const double dirichlet = -e_flf;  // E[F(-LF)]
                violation = std::max(violation, -dirichlet);
            }
            push("Dirichlet form nonnegative", violation, 1e-8);
        }
    } catch (const std::exception& e) {
        rep.checks.push_back(
            {std::string("coefficient extraction failed: ") + e.what(), 1.0, 0.0, false});
    }

    // stationarity via detailed balance for redistribution kinds
    if (m.kind() == Kind::Redistribution) {
        const auto& k = m.kernel();
        const auto marginal = m.invariant_marginal();
        Rng rng(404u);
        double worst = 0.0;
        int tested = 0;
        for (int trial = 0; trial < 200 && tested < 50; ++trial) {
            const double ex = nef::sample_one(marginal, rng);
            const double ey = nef::sample_one(marginal, rng);
            if (!k.admissible(ex, ey)) continue;
            const double alpha = k.sample_transfer(ex, ey, rng);
            const double lhs = k.density(ex, ey, alpha) * nef::density(marginal, ex) *
                               nef::density(marginal, ey);
            const double rhs = k.density(ey + alpha, ex - alpha, alpha) *
                               nef::density(marginal, ex - alpha) *
                               nef::density(marginal, ey + alpha);
            if (lhs <= 0.0) continue;
            worst = std::max(worst, std::abs(lhs - rhs) / lhs);
            ++tested;
        }
        push("detailed balance (relative)", worst, 1e-10 * tol_scale);
    }

    return rep;
}

}  // namespace qvlat::models
