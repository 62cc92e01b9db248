#include "sfr/riemann3.hpp"

#include <sstream>

namespace sfr {

MetricField make_metric(TensorField g, Exec ex) {
    MetricField m;
    const auto& grid = g.grid;
    m.ginv = TensorField(grid);
    m.sqrt_det = ScalarField(grid);
    std::vector<char> bad(grid.size(), 0);
    for_each_index(grid.size(), ex, [&](std::size_t i) {
        g[i] = sym(g[i]);
        Eigen::LLT<Mat3> llt(g[i]);
        const double det = g[i].determinant();
        if (llt.info() != Eigen::Success || !(det > 0.0) || !std::isfinite(det)) {
            bad[i] = 1;
            return;
        }
        m.ginv[i] = g[i].inverse();
        m.sqrt_det[i] = std::sqrt(det);
    });
    for (std::size_t i = 0; i < bad.size(); ++i) {
        if (bad[i]) {
            const Vec3 x = grid.point(i);
            std::ostringstream os;
            os << "metric not positive-definite at grid point " << i << " (" << x[0] << ", " << x[1] << ", "
               << x[2] << ")";
            throw DegeneracyError(os.str());
        }
    }
    m.g = std::move(g);
    return m;
}

MetricField flat_metric(const ChartGrid& grid) { return make_metric(TensorField(grid, Mat3::Identity())); }

ChristoffelField christoffel3(const MetricField& m, Exec ex) {
    const auto dg = gradient(m.g, ex);
    ChristoffelField out(m.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        // lowered: G_l,ij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        Christoffel3 lo;
        for (int l = 0; l < 3; ++l)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    lo.G[l](i, j) = 0.5 * (dg[i][p](j, l) + dg[j][p](i, l) - dg[l][p](i, j));
        Christoffel3& up = out[p];
        const Mat3& gi = m.ginv[p];
        for (int k = 0; k < 3; ++k) {
            Mat3 s = Mat3::Zero();
            for (int l = 0; l < 3; ++l) s += gi(k, l) * lo.G[l];
            up.G[k] = sym(s);
        }
    });
    return out;
}

Curvature3 curvature3(const MetricField& m, const ChristoffelField& gamma, Exec ex, bool keep_riemann) {
    const auto dG = gradient(gamma, ex);
    Curvature3 c;
    const auto& grid = m.grid();
    if (keep_riemann) c.riemann = Field<Riemann3>(grid);
    c.ricci = TensorField(grid);
    c.scalar = ScalarField(grid);
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const Christoffel3& G = gamma[p];
        Riemann3 R;
        for (int d = 0; d < 3; ++d)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    for (int cc = 0; cc < 3; ++cc) {
                        double v = dG[a][p].G[d](b, cc) - dG[b][p].G[d](a, cc);
                        for (int e = 0; e < 3; ++e) v += G.G[e](b, cc) * G.G[d](a, e) - G.G[e](a, cc) * G.G[d](b, e);
                        R(d, a, b, cc) = v;
                    }
        Mat3 ric = Mat3::Zero();
        for (int b = 0; b < 3; ++b)
            for (int cc = 0; cc < 3; ++cc)
                for (int a = 0; a < 3; ++a) ric(b, cc) += R(a, a, b, cc);
        ric = sym(ric);
        c.ricci[p] = ric;
        c.scalar[p] = (m.ginv[p].cwiseProduct(ric)).sum();
        if (keep_riemann) c.riemann[p] = R;
    });
    return c;
}

TensorField jacobian(const VectorField& U, Exec ex) {
    const auto dU = gradient(U, ex);
    TensorField J(U.grid);
    for_each_index(J.size(), ex, [&](std::size_t p) {
        for (int i = 0; i < 3; ++i) J[p].col(i) = dU[i][p];
    });
    return J;
}

TensorField cov_jacobian(const ChristoffelField& gamma, const VectorField& U, Exec ex) {
    TensorField A = jacobian(U, ex);
    for_each_index(A.size(), ex, [&](std::size_t p) {
        for (int k = 0; k < 3; ++k) A[p].row(k) += (gamma[p].G[k] * U[p]).transpose();
    });
    return A;
}

TensorField lie_metric(const MetricField& m, const VectorField& U, Exec ex) {
    const auto dg = gradient(m.g, ex);
    const TensorField J = jacobian(U, ex);
    TensorField L(U.grid);
    for_each_index(L.size(), ex, [&](std::size_t p) {
        Mat3 s = U[p][0] * dg[0][p] + U[p][1] * dg[1][p] + U[p][2] * dg[2][p];
        const Mat3 gJ = m.g[p] * J[p];  // (gJ)_ji = g_jk d_i U^k
        s += gJ + gJ.transpose();
        L[p] = sym(s);
    });
    return L;
}

VectorField cov_deriv(const ChristoffelField& gamma, const VectorField& V, const VectorField& W, Exec ex) {
    const TensorField J = jacobian(W, ex);
    VectorField out(W.grid);
    for_each_index(out.size(), ex, [&](std::size_t p) { out[p] = J[p] * V[p] + gamma[p].contract(V[p], W[p]); });
    return out;
}

VectorField grad_scalar(const MetricField& m, const ScalarField& f, Exec ex) {
    const auto df = gradient(f, ex);
    VectorField out(f.grid);
    for_each_index(out.size(), ex, [&](std::size_t p) {
        out[p] = m.ginv[p] * Vec3(df[0][p], df[1][p], df[2][p]);
    });
    return out;
}

ScalarField directional(const VectorField& V, const ScalarField& f, Exec ex) {
    const auto df = gradient(f, ex);
    ScalarField out(f.grid);
    for_each_index(out.size(), ex,
                   [&](std::size_t p) { out[p] = V[p][0] * df[0][p] + V[p][1] * df[1][p] + V[p][2] * df[2][p]; });
    return out;
}

TensorField hessian(const ChristoffelField& gamma, const ScalarField& f, Exec ex) {
    const auto df = gradient(f, ex);
    std::array<std::array<ScalarField, 3>, 3> ddf;
    for (int i = 0; i < 3; ++i) {
        const auto d2 = gradient(df[i], ex);
        for (int j = 0; j < 3; ++j) ddf[i][j] = d2[j];
    }
    TensorField H(f.grid);
    for_each_index(H.size(), ex, [&](std::size_t p) {
        const Vec3 d(df[0][p], df[1][p], df[2][p]);
        Mat3 h;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h(i, j) = ddf[i][j][p];
        for (int k = 0; k < 3; ++k) h -= d[k] * gamma[p].G[k];
        H[p] = sym(h);
    });
    return H;
}

Vec3 cross_g(const Mat3& ginv, double sqrt_det, const Vec3& a, const Vec3& b) {
    return sqrt_det * (ginv * a.cross(b));
}

namespace reference {

ScalarField partial(const ScalarField& f, int axis) {
    const ChartGrid& g = f.grid;
    const Axis& ax = g.axis(axis);
    const int n = ax.n;
    const double h = ax.h();
    ScalarField out(g);
    for (int i = 0; i < g.n(0); ++i)
        for (int j = 0; j < g.n(1); ++j)
            for (int k = 0; k < g.n(2); ++k) {
                int c[3] = {i, j, k};
                auto at = [&](int q) {
                    int cc[3] = {c[0], c[1], c[2]};
                    cc[axis] = ax.periodic ? ((q % n) + n) % n : q;
                    return f[g.index(cc[0], cc[1], cc[2])];
                };
                const int p = c[axis];
                double d;
                if (ax.periodic || (p >= 2 && p <= n - 3))
                    d = (at(p - 2) - 8 * at(p - 1) + 8 * at(p + 1) - at(p + 2)) / (12 * h);
                else if (p == 0)
                    d = (-25 * at(0) + 48 * at(1) - 36 * at(2) + 16 * at(3) - 3 * at(4)) / (12 * h);
                else if (p == 1)
                    d = (-3 * at(0) - 10 * at(1) + 18 * at(2) - 6 * at(3) + at(4)) / (12 * h);
                else if (p == n - 2)
                    d = (3 * at(n - 1) + 10 * at(n - 2) - 18 * at(n - 3) + 6 * at(n - 4) - at(n - 5)) / (12 * h);
                else
                    d = (25 * at(n - 1) - 48 * at(n - 2) + 36 * at(n - 3) - 16 * at(n - 4) + 3 * at(n - 5)) / (12 * h);
                out[g.index(i, j, k)] = d;
            }
    return out;
}

ChristoffelField christoffel3(const MetricField& m) {
    const ChartGrid& g = m.grid();
    // dg[c][a][b] = d_c g_ab
    ScalarField comp[3][3];
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            comp[a][b] = ScalarField(g);
            for (std::size_t p = 0; p < g.size(); ++p) comp[a][b][p] = m.g[p](a, b);
        }
    ScalarField dg[3][3][3];
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) dg[c][a][b] = partial(comp[a][b], c);
    ChristoffelField out(g);
    for (std::size_t p = 0; p < g.size(); ++p)
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < 3; ++l)
                        s += m.ginv[p](k, l) * (dg[i][j][l][p] + dg[j][i][l][p] - dg[l][i][j][p]);
                    out[p].G[k](i, j) = 0.5 * s;
                }
    return out;
}

}  // namespace reference

}  // namespace sfr
