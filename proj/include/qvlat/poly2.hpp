#pragma once

// Small dense bivariate polynomials in the two bond states. Used to apply
// bond generators to test functions exactly (degree stays modest: the
// assumption checks need at most degree five).

#include <array>
#include <cstddef>

namespace qvlat {

class Poly2 {
  public:
    static constexpr int kMaxDeg = 8;

    Poly2() { coef_.fill(0.0); }

    static Poly2 constant(double c) {
        Poly2 p;
        p.at(0, 0) = c;
        return p;
    }
    static Poly2 x0() {
        Poly2 p;
        p.at(1, 0) = 1.0;
        return p;
    }
    static Poly2 x1() {
        Poly2 p;
        p.at(0, 1) = 1.0;
        return p;
    }

    double& at(int i, int j) { return coef_[idx(i, j)]; }
    double at(int i, int j) const { return coef_[idx(i, j)]; }

    double eval(double e0, double e1) const {
        // Horner in e0 with inner Horner in e1
        double acc = 0.0;
        for (int i = kMaxDeg; i >= 0; --i) {
            double inner = 0.0;
            for (int j = kMaxDeg; j >= 0; --j) inner = inner * e1 + at(i, j);
            acc = acc * e0 + inner;
        }
        return acc;
    }

    int degree() const {
        int d = 0;
        for (int i = 0; i <= kMaxDeg; ++i)
            for (int j = 0; j <= kMaxDeg; ++j)
                if (at(i, j) != 0.0 && i + j > d) d = i + j;
        return d;
    }

    Poly2 operator+(const Poly2& o) const {
        Poly2 r;
        for (std::size_t k = 0; k < coef_.size(); ++k) r.coef_[k] = coef_[k] + o.coef_[k];
        return r;
    }
    Poly2 operator-(const Poly2& o) const {
        Poly2 r;
        for (std::size_t k = 0; k < coef_.size(); ++k) r.coef_[k] = coef_[k] - o.coef_[k];
        return r;
    }
    Poly2 operator*(double s) const {
        Poly2 r;
        for (std::size_t k = 0; k < coef_.size(); ++k) r.coef_[k] = coef_[k] * s;
        return r;
    }
    Poly2 operator*(const Poly2& o) const {
        Poly2 r;
        for (int i = 0; i <= kMaxDeg; ++i)
            for (int j = 0; j <= kMaxDeg; ++j) {
                if (at(i, j) == 0.0) continue;
                for (int k = 0; i + k <= kMaxDeg; ++k)
                    for (int l = 0; j + l <= kMaxDeg; ++l) {
                        if (o.at(k, l) == 0.0) continue;
                        r.at(i + k, j + l) += at(i, j) * o.at(k, l);
                    }
            }
        return r;
    }

    // Partial derivatives, exact.
    Poly2 d0() const {
        Poly2 r;
        for (int i = 1; i <= kMaxDeg; ++i)
            for (int j = 0; j <= kMaxDeg; ++j) r.at(i - 1, j) = i * at(i, j);
        return r;
    }
    Poly2 d1() const {
        Poly2 r;
        for (int i = 0; i <= kMaxDeg; ++i)
            for (int j = 1; j <= kMaxDeg; ++j) r.at(i, j - 1) = j * at(i, j);
        return r;
    }

    Poly2 swapped() const {
        Poly2 r;
        for (int i = 0; i <= kMaxDeg; ++i)
            for (int j = 0; j <= kMaxDeg; ++j) r.at(j, i) = at(i, j);
        return r;
    }

  private:
    static std::size_t idx(int i, int j) {
        return static_cast<std::size_t>(i) * (kMaxDeg + 1) + static_cast<std::size_t>(j);
    }
    std::array<double, (kMaxDeg + 1) * (kMaxDeg + 1)> coef_;
};

inline Poly2 operator*(double s, const Poly2& p) { return p * s; }

}  // namespace qvlat
