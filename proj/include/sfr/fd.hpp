#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfr/grid.hpp"

namespace sfr {

namespace detail {

// Fourth-order first-derivative rows on a uniform grid (multiply by 1/(12h)).
inline constexpr double kCentral[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
inline constexpr double kEdge0[5] = {-25.0, 48.0, -36.0, 16.0, -3.0};
inline constexpr double kEdge1[5] = {-3.0, -10.0, 18.0, -6.0, 1.0};

struct Stencil {
    std::ptrdiff_t off[5];
    double w[5];
};

// Offsets are in units of the axis stride relative to the evaluation point.
inline Stencil derivative_stencil(int p, int n, bool periodic, double h) {
    Stencil s{};
    const double inv = 1.0 / (12.0 * h);
    if (periodic || (p >= 2 && p <= n - 3)) {
        for (int m = 0; m < 5; ++m) {
            int q = p + m - 2;
            if (periodic) q = ((q % n) + n) % n;
            s.off[m] = q - p;
            s.w[m] = kCentral[m] * inv;
        }
        return s;
    }
    const double* row = nullptr;
    int first = 0;
    double sign = 1.0;
    if (p == 0) { row = kEdge0; first = 0; }
    else if (p == 1) { row = kEdge1; first = 0; }
    else if (p == n - 1) { row = kEdge0; first = n - 1; sign = -1.0; }
    else { row = kEdge1; first = n - 1; sign = -1.0; }
    for (int m = 0; m < 5; ++m) {
        const int q = (sign > 0) ? first + m : first - m;
        s.off[m] = q - p;
        s.w[m] = sign * row[m] * inv;
    }
    return s;
}

// Cubic Lagrange weights on nodes base..base+3 evaluated at fractional index xi.
inline void cubic_weights(double xi, int base, double w[4]) {
    for (int m = 0; m < 4; ++m) {
        double l = 1.0;
        for (int k = 0; k < 4; ++k)
            if (k != m) l *= (xi - (base + k)) / double(m - k);
        w[m] = l;
    }
}

}  // namespace detail

template <class T>
T partial_at(const Field<T>& f, std::size_t idx, int axis) {
    const ChartGrid& g = f.grid;
    const auto c = g.ijk(idx);
    const Axis& a = g.axis(axis);
    const auto st = detail::derivative_stencil(c[axis], a.n, a.periodic, a.h());
    const auto stride = static_cast<std::ptrdiff_t>(g.stride(axis));
    T acc = st.w[0] * f[idx + st.off[0] * stride];
    for (int m = 1; m < 5; ++m)
        if (st.w[m] != 0.0) acc += st.w[m] * f[idx + st.off[m] * stride];
    return acc;
}

template <class T>
Field<T> partial(const Field<T>& f, int axis, Exec ex = Exec::Parallel) {
    Field<T> out(f.grid);
    for_each_index(f.size(), ex, [&](std::size_t i) { out[i] = partial_at(f, i, axis); });
    return out;
}

template <class T>
std::array<Field<T>, 3> gradient(const Field<T>& f, Exec ex = Exec::Parallel) {
    return {partial(f, 0, ex), partial(f, 1, ex), partial(f, 2, ex)};
}

// Tricubic (tensor-product cubic Lagrange) interpolation; exact for cubics.
template <class T>
T interpolate(const Field<T>& f, const Vec3& x) {
    const ChartGrid& g = f.grid;
    const auto y = g.canonical(x);
    if (!y) throw DomainError("interpolate: point outside chart");
    int base[3];
    double w[3][4];
    for (int a = 0; a < 3; ++a) {
        const Axis& ax = g.axis(a);
        const double xi = ((*y)[a] - ax.min) / ax.h();
        int b = static_cast<int>(std::floor(xi)) - 1;
        if (!ax.periodic) b = std::clamp(b, 0, ax.n - 4);
        base[a] = b;
        detail::cubic_weights(xi, b, w[a]);
    }
    auto wrap = [&](int a, int q) {
        const int n = g.n(a);
        return g.axis(a).periodic ? ((q % n) + n) % n : q;
    };
    T acc = 0.0 * f[0];
    for (int i = 0; i < 4; ++i) {
        const int qi = wrap(0, base[0] + i);
        for (int j = 0; j < 4; ++j) {
            const int qj = wrap(1, base[1] + j);
            const double wij = w[0][i] * w[1][j];
            for (int k = 0; k < 4; ++k) {
                const int qk = wrap(2, base[2] + k);
                acc += (wij * w[2][k]) * f[g.index(qi, qj, qk)];
            }
        }
    }
    return acc;
}

struct Curve {
    std::vector<Vec3> points;
    std::vector<double> s;
    bool exited = false;
};

// RK4 integral curve of a velocity callable returning std::optional<Vec3>
// (nullopt marks leaving the domain). ds may be negative.
template <class V>
Curve trace(V&& vel, const Vec3& x0, double ds, double smax) {
    Curve c;
    c.points.push_back(x0);
    c.s.push_back(0.0);
    Vec3 x = x0;
    const double dir = ds < 0 ? -1.0 : 1.0;
    double s = 0.0;
    while (s < smax * (1 - 1e-14)) {
        const double step = dir * std::min(std::abs(ds), smax - s);
        const auto k1 = vel(x);
        if (!k1) { c.exited = true; break; }
        const auto k2 = vel(Vec3(x + 0.5 * step * *k1));
        if (!k2) { c.exited = true; break; }
        const auto k3 = vel(Vec3(x + 0.5 * step * *k2));
        if (!k3) { c.exited = true; break; }
        const auto k4 = vel(Vec3(x + step * *k3));
        if (!k4) { c.exited = true; break; }
        x += step / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
        s += std::abs(step);
        c.points.push_back(x);
        c.s.push_back(s);
    }
    return c;
}

Curve trace_curve(const VectorField& v, const Vec3& x0, double ds, double smax);

}  // namespace sfr
