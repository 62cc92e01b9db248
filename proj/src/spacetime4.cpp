#include "sfr/spacetime4.hpp"

namespace sfr {

double Lapse::dt(double t, const Vec3& x) const {
    if (!fn) return 0.0;
    if (dt_fn) return dt_fn(t, x);
    const double d = 1e-3;
    return (fn(t - 2 * d, x) - 8 * fn(t - d, x) + 8 * fn(t + d, x) - fn(t + 2 * d, x)) / (12 * d);
}

ScalarField Lapse::sample(const ChartGrid& g, double t) const {
    return sfr::sample<double>(g, [&](const Vec3& x) { return value(t, x); });
}

ScalarField Lapse::sample_dt(const ChartGrid& g, double t) const {
    return sfr::sample<double>(g, [&](const Vec3& x) { return dt(t, x); });
}

Slice make_slice(double t, MetricField g, VectorField U, const Lapse& lapse) {
    Slice s;
    s.t = t;
    s.f = lapse.sample(g.grid(), t);
    s.dt_f = lapse.sample_dt(g.grid(), t);
    s.g = std::move(g);
    s.U = std::move(U);
    return s;
}

Christoffel4Field christoffel4(const Slice& s, const TensorField& K, const ChristoffelField& gamma3, Exec ex) {
    const auto df = gradient(s.f, ex);
    Christoffel4Field out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Vec3 dlnf = Vec3(df[0][p], df[1][p], df[2][p]) / f;
        const Mat3& gi = s.g.ginv[p];
        const Mat3 mixed = 0.5 * gi * K[p];  // Gamma^k_0i = 1/2 g^kj dt g_ij
        const Vec3 gradf = gi * Vec3(df[0][p], df[1][p], df[2][p]);
        Christoffel4 G;
        G.G[0](0, 0) = s.dt_f[p] / f;
        for (int i = 0; i < 3; ++i) {
            G.G[0](0, i + 1) = G.G[0](i + 1, 0) = dlnf[i];
            G.G[i + 1](0, 0) = f * gradf[i];
        }
        G.G[0].block<3, 3>(1, 1) = K[p] / (2 * f * f);
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < 3; ++i) G.G[k + 1](0, i + 1) = G.G[k + 1](i + 1, 0) = mixed(k, i);
            G.G[k + 1].block<3, 3>(1, 1) = gamma3[p].G[k];
        }
        out[p] = G;
    });
    return out;
}

namespace {

Field<Mat4> metric4(const MetricField& g, const ScalarField& f, Exec ex) {
    Field<Mat4> G(g.grid());
    for_each_index(G.size(), ex, [&](std::size_t p) {
        Mat4 m = Mat4::Zero();
        m(0, 0) = -f[p] * f[p];
        m.block<3, 3>(1, 1) = g.g[p];
        G[p] = m;
    });
    return G;
}

Christoffel4 christoffel_from(const Mat4& Ginv, const std::array<Mat4, 4>& dG) {
    Christoffel4 out;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int d = 0; d < 4; ++d) s += Ginv(a, d) * (dG[b](d, c) + dG[c](d, b) - dG[d](b, c));
                out.G[a](b, c) = 0.5 * s;
            }
    return out;
}

}  // namespace

Christoffel4Field christoffel4_oracle(const std::array<const MetricField*, 3>& g, const std::array<const ScalarField*, 3>& f,
                                      double dt, Exec ex) {
    const auto Gm = metric4(*g[0], *f[0], ex);
    const auto G0 = metric4(*g[1], *f[1], ex);
    const auto Gp = metric4(*g[2], *f[2], ex);
    const auto dG = gradient(G0, ex);
    Christoffel4Field out(G0.grid);
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const std::array<Mat4, 4> d{(Gp[p] - Gm[p]) / (2 * dt), dG[0][p], dG[1][p], dG[2][p]};
        out[p] = christoffel_from(G0[p].inverse(), d);
    });
    return out;
}

ChristoffelField dt_christoffel(const MetricField& m, const ChristoffelField& gamma3, const TensorField& K, Exec ex) {
    const auto dK = gradient(K, ex);
    ChristoffelField out(m.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const Mat3& gi = m.ginv[p];
        Christoffel3 lo;
        for (int l = 0; l < 3; ++l)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) lo.G[l](i, j) = 0.5 * (dK[i][p](j, l) + dK[j][p](i, l) - dK[l][p](i, j));
        const Mat3 giK = gi * K[p];
        Christoffel3 r;
        for (int k = 0; k < 3; ++k) {
            Mat3 s = Mat3::Zero();
            for (int l = 0; l < 3; ++l) s += gi(k, l) * lo.G[l] - giK(k, l) * gamma3[p].G[l];
            r.G[k] = sym(s);
        }
        out[p] = r;
    });
    return out;
}

namespace {

// R^0_ijk from dt Gamma, K, d ln f and f.
Rank3 r0ijk_at(const Mat3& g, const Christoffel3& dtG, const Mat3& K, const Vec3& dlnf, double f) {
    Rank3 r;
    const double c = 1.0 / (2 * f * f);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                double s = 0;
                for (int l = 0; l < 3; ++l) s += g(l, j) * dtG.G[l](i, k) - g(l, i) * dtG.G[l](j, k);
                r(i, j, k) = c * (s - dlnf[i] * K(j, k) + dlnf[j] * K(i, k));
            }
    return r;
}

}  // namespace

Curvature4 curvature4(const Slice& s, const TensorField& K, const TensorField& Kt, Exec ex) {
    const auto gamma3 = christoffel3(s.g, ex);
    const auto c3 = curvature3(s.g, gamma3, ex, true);
    const auto dtG = dt_christoffel(s.g, gamma3, K, ex);
    const auto H = hessian(gamma3, s.f, ex);
    const auto df = gradient(s.f, ex);
    Curvature4 out;
    out.R0i0j = TensorField(s.grid());
    out.R0ijk = Field<Rank3>(s.grid());
    out.Rlijk = Field<Riemann3>(s.grid());
    for_each_index(s.grid().size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Mat3& gi = s.g.ginv[p];
        const Mat3& k = K[p];
        out.R0i0j[p] = sym(-0.25 * k * gi * k + 0.5 * Kt[p] - f * H[p] - 0.5 * (s.dt_f[p] / f) * k);
        const Vec3 dlnf = Vec3(df[0][p], df[1][p], df[2][p]) / f;
        out.R0ijk[p] = r0ijk_at(s.g.g[p], dtG[p], k, dlnf, f);
        Riemann3 R = c3.riemann[p];
        const Mat3 giK = gi * k;  // (g^-1 K)^l_m
        const double c = 1.0 / (4 * f * f);
        for (int l = 0; l < 3; ++l)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int kk = 0; kk < 3; ++kk) R(l, i, j, kk) += c * (k(j, kk) * giK(l, i) - k(i, kk) * giK(l, j));
        out.Rlijk[p] = R;
    });
    return out;
}

std::vector<Riemann4> riemann4_oracle(const std::array<const MetricField*, 5>& g,
                                      const std::array<const ScalarField*, 5>& f, double dt,
                                      const std::vector<std::size_t>& points) {
    const auto Gm = christoffel4_oracle({g[0], g[1], g[2]}, {f[0], f[1], f[2]}, dt);
    const auto G0 = christoffel4_oracle({g[1], g[2], g[3]}, {f[1], f[2], f[3]}, dt);
    const auto Gp = christoffel4_oracle({g[2], g[3], g[4]}, {f[2], f[3], f[4]}, dt);
    std::vector<Riemann4> out(points.size());
    for (std::size_t n = 0; n < points.size(); ++n) {
        const std::size_t p = points[n];
        std::array<Christoffel4, 4> dG;
        dG[0] = (1.0 / (2 * dt)) * (Gp[p] + (-1.0) * Gm[p]);
        for (int a = 0; a < 3; ++a) dG[a + 1] = partial_at(G0, p, a);
        const Christoffel4& G = G0[p];
        Riemann4 R;
        for (int d = 0; d < 4; ++d)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    for (int c = 0; c < 4; ++c) {
                        double v = dG[a].G[d](b, c) - dG[b].G[d](a, c);
                        for (int e = 0; e < 4; ++e) v += G.G[e](b, c) * G.G[d](a, e) - G.G[e](a, c) * G.G[d](b, e);
                        R(d, a, b, c) = v;
                    }
        out[n] = R;
    }
    return out;
}

RayDerivs ray_derivs(const Slice& s, const VectorField& dt_U, const TensorField& K, Exec ex) {
    const auto gamma3 = christoffel3(s.g, ex);
    const auto nUU = cov_deriv(gamma3, s.U, s.U, ex);
    const auto df = gradient(s.f, ex);
    RayDerivs r{Field<Vec4>(s.grid()), Field<Vec4>(s.grid())};
    for_each_index(s.grid().size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Vec3& u = s.U[p];
        const Vec3 d(df[0][p], df[1][p], df[2][p]);
        const double Uf = u.dot(d);
        const Vec3 KU = s.g.ginv[p] * (K[p] * u);
        Vec4 first;
        first[0] = Uf / f + u.dot(K[p] * u) / (2 * f);
        first.tail<3>() = dt_U[p] + f * nUU[p] + 0.5 * KU;
        // printed form assumes nabla_W U = 0; the general expression adds f * first
        Vec4 second;
        const double Wf = s.dt_f[p] + f * Uf;
        second[0] = s.dt_f[p] / f + Uf;
        second.tail<3>() = f * (s.g.ginv[p] * d) + Wf * u + 0.5 * f * KU;
        second += f * first;
        r.first[p] = first;
        r.second[p] = second;
    });
    return r;
}

TensorField mixed_curvature(const Slice& s, const TensorField& K, Exec ex) {
    const auto gamma3 = christoffel3(s.g, ex);
    const auto dtG = dt_christoffel(s.g, gamma3, K, ex);
    const auto df = gradient(s.f, ex);
    TensorField M(s.grid());
    for_each_index(M.size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Vec3 dlnf = Vec3(df[0][p], df[1][p], df[2][p]) / f;
        const Rank3 r = r0ijk_at(s.g.g[p], dtG[p], K[p], dlnf, f);
        const Vec3& u = s.U[p];
        Mat3 m = Mat3::Zero();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) m(i, j) += u[k] * r(k, j, i);
        M[p] = f * f * m;
    });
    return M;
}

ScalarField ricci4_tU(const Slice& s, const TensorField& K, Exec ex) {
    const auto gamma3 = christoffel3(s.g, ex);
    const auto dtG = dt_christoffel(s.g, gamma3, K, ex);
    const auto df = gradient(s.f, ex);
    ScalarField out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Vec3 dlnf = Vec3(df[0][p], df[1][p], df[2][p]) / f;
        const Rank3 r = r0ijk_at(s.g.g[p], dtG[p], K[p], dlnf, f);
        const Vec3& u = s.U[p];
        double acc = 0;
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
                for (int m = 0; m < 3; ++m) acc += u[k] * s.g.ginv[p](l, m) * r(k, m, l);
        out[p] = -f * f * acc;
    });
    return out;
}

TensorField curvature_R(const Slice& s, const TensorField& K, const Curvature3* c3, Exec ex) {
    Curvature3 local;
    if (!c3) {
        local = curvature3(s.g, christoffel3(s.g, ex), ex, false);
        c3 = &local;
    }
    const auto M = mixed_curvature(s, K, ex);
    TensorField out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) { out[p] = -s.f[p] * c3->ricci[p] + sym(M[p]); });
    return out;
}

VectorField geodesic_defect(const Slice& s, const TensorField& T, Exec ex) {
    const auto df = gradient(s.f, ex);
    VectorField out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const Vec3 d(df[0][p], df[1][p], df[2][p]);
        const Vec3& u = s.U[p];
        out[p] = s.g.ginv[p] * (T[p] * u) + 0.5 * (s.g.ginv[p] * d) - 0.5 * u.dot(d) * u;
    });
    return out;
}

}  // namespace sfr
