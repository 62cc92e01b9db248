#pragma once

#include <cmath>
#include <random>

#include "sfr/grid.hpp"

namespace sfr::testing {

inline double order(double coarse_err, double fine_err, double ratio = 2.0) {
    return std::log(coarse_err / fine_err) / std::log(ratio);
}

// Max over points at least `margin` index steps away from non-periodic faces.
template <class Fn>
double interior_max(const ChartGrid& g, int margin, Fn&& fn) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.boundary_distance(i) >= margin) m = std::max(m, fn(i));
    return m;
}

inline double uniform(std::mt19937_64& r, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(r);
}

}  // namespace sfr::testing

namespace sfr::testing {

// Analytic oracle: q(t, x) = base + eps * sum_m A_m sin(k_m . x + w_m t + p_m), with
// exact first and second derivatives in (t, x1, x2, x3) (index 0 is t).
struct SmoothScalar {
    double base = 1.0;
    double eps = 0.1;
    std::vector<std::array<double, 6>> modes;  // A, kx, ky, kz, w, phase

    SmoothScalar() = default;
    SmoothScalar(std::mt19937_64& r, double base_, double eps_, int nmodes = 3, double kmax = 2.0) : base(base_), eps(eps_) {
        for (int m = 0; m < nmodes; ++m)
            modes.push_back({uniform(r, -1, 1), uniform(r, -kmax, kmax), uniform(r, -kmax, kmax),
                             uniform(r, -kmax, kmax), uniform(r, -kmax, kmax), uniform(r, 0, 6.283)});
    }
    double value(double t, const Vec3& x) const {
        double s = base;
        for (const auto& m : modes) s += eps * m[0] * std::sin(m[1] * x[0] + m[2] * x[1] + m[3] * x[2] + m[4] * t + m[5]);
        return s;
    }
    // a in 0..3 with 0 = t
    double d(int a, double t, const Vec3& x) const {
        double s = 0;
        for (const auto& m : modes) {
            const double k = a == 0 ? m[4] : m[a];
            s += eps * m[0] * k * std::cos(m[1] * x[0] + m[2] * x[1] + m[3] * x[2] + m[4] * t + m[5]);
        }
        return s;
    }
    double dd(int a, int b, double t, const Vec3& x) const {
        double s = 0;
        for (const auto& m : modes) {
            const double ka = a == 0 ? m[4] : m[a];
            const double kb = b == 0 ? m[4] : m[b];
            s -= eps * m[0] * ka * kb * std::sin(m[1] * x[0] + m[2] * x[1] + m[3] * x[2] + m[4] * t + m[5]);
        }
        return s;
    }
};

// Symmetric positive-definite 3x3 field built from six SmoothScalars.
struct SmoothMetric {
    std::array<SmoothScalar, 6> c;
    static constexpr int I[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};

    SmoothMetric() = default;
    SmoothMetric(std::mt19937_64& r, double eps, double kmax = 2.0) {
        for (int m = 0; m < 6; ++m) {
            const bool diag = I[m][0] == I[m][1];
            c[m] = SmoothScalar(r, diag ? 1.0 : 0.0, eps, 3, kmax);
        }
    }
    template <class F>
    Mat3 build(F&& f) const {
        Mat3 g;
        for (int m = 0; m < 6; ++m) {
            const double v = f(c[m]);
            g(I[m][0], I[m][1]) = v;
            g(I[m][1], I[m][0]) = v;
        }
        return g;
    }
    Mat3 value(double t, const Vec3& x) const { return build([&](const SmoothScalar& s) { return s.value(t, x); }); }
    Mat3 d(int a, double t, const Vec3& x) const { return build([&](const SmoothScalar& s) { return s.d(a, t, x); }); }
    Mat3 dd(int a, int b, double t, const Vec3& x) const {
        return build([&](const SmoothScalar& s) { return s.dd(a, b, t, x); });
    }

    // Exact spatial Christoffel symbols.
    Christoffel3 gamma(double t, const Vec3& x) const {
        const Mat3 gi = value(t, x).inverse();
        std::array<Mat3, 3> dg{d(1, t, x), d(2, t, x), d(3, t, x)};
        Christoffel3 G;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double s = 0;
                    for (int l = 0; l < 3; ++l) s += gi(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                    G.G[k](i, j) = 0.5 * s;
                }
        return G;
    }
    // Exact derivative of the spatial Christoffel symbols along coordinate a (0 = t).
    Christoffel3 dgamma(int a, double t, const Vec3& x) const {
        const Mat3 g = value(t, x);
        const Mat3 gi = g.inverse();
        const Mat3 dgi = -gi * d(a, t, x) * gi;
        std::array<Mat3, 3> dg{d(1, t, x), d(2, t, x), d(3, t, x)};
        std::array<Mat3, 3> ddg{dd(a, 1, t, x), dd(a, 2, t, x), dd(a, 3, t, x)};
        Christoffel3 G;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double s = 0;
                    for (int l = 0; l < 3; ++l)
                        s += dgi(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j)) +
                             gi(k, l) * (ddg[i](j, l) + ddg[j](i, l) - ddg[l](i, j));
                    G.G[k](i, j) = 0.5 * s;
                }
        return G;
    }
    Riemann3 riemann(double t, const Vec3& x) const {
        const Christoffel3 G = gamma(t, x);
        std::array<Christoffel3, 3> dG{dgamma(1, t, x), dgamma(2, t, x), dgamma(3, t, x)};
        Riemann3 R;
        for (int dd_ = 0; dd_ < 3; ++dd_)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    for (int cc = 0; cc < 3; ++cc) {
                        double v = dG[a].G[dd_](b, cc) - dG[b].G[dd_](a, cc);
                        for (int e = 0; e < 3; ++e) v += G.G[e](b, cc) * G.G[dd_](a, e) - G.G[e](a, cc) * G.G[dd_](b, e);
                        R(dd_, a, b, cc) = v;
                    }
        return R;
    }
};

}  // namespace sfr::testing
