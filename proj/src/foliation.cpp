#include "sfr/foliation.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sfr {

namespace {

double gdot(const Mat3& g, const Vec3& a, const Vec3& b) { return a.dot(g * b); }

cplx cg(const Mat3& g, const CVec3& a, const CVec3& b) { return a.transpose() * (g.cast<cplx>() * b); }

void check_unit(const MetricField& m, const VectorField& U, double tol) {
    for (std::size_t p = 0; p < U.size(); ++p) {
        const double n = gdot(m.g[p], U[p], U[p]);
        if (!(std::abs(n - 1) <= tol)) {
            const Vec3 x = m.grid().point(p);
            std::ostringstream os;
            os << "complementary_frame: |g(U,U) - 1| = " << std::abs(n - 1) << " at (" << x[0] << ", " << x[1] << ", "
               << x[2] << ")";
            throw DomainError(os.str());
        }
    }
}

}  // namespace

Frame2 complementary_frame(const MetricField& m, const VectorField& U, const Vec3& seed, double unit_tol, Exec ex) {
    check_unit(m, U, unit_tol);
    const ChartGrid& grid = m.grid();
    Frame2 fr{VectorField(grid), VectorField(grid), seed, {}};
    std::vector<char> fell(grid.size(), 0), failed(grid.size(), 0);
    const std::array<Vec3, 4> cands{seed, Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const Mat3& g = m.g[p];
        const Vec3& u = U[p];
        int pick = -1;
        for (int c = 0; c < 4; ++c) {
            const Vec3& s = cands[c];
            const double ns = std::sqrt(gdot(g, s, s));
            if (ns == 0) continue;
            if (std::abs(gdot(g, s, u)) / ns <= kSeedCosLimit) {
                pick = c;
                break;
            }
        }
        if (pick < 0) {
            failed[p] = 1;
            return;
        }
        fell[p] = pick > 0;
        Vec3 x = cands[pick] - gdot(g, cands[pick], u) * u;
        x /= std::sqrt(gdot(g, x, x));
        fr.X[p] = x;
        fr.Y[p] = cross_g(m.ginv[p], m.sqrt_det[p], u, x);
    });
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (failed[p]) throw DegeneracyError("complementary_frame: no admissible seed at grid point " + std::to_string(p));
        if (fell[p]) fr.fallback_points.push_back(p);
    }
    return fr;
}

Frame2 continue_frame(const Frame2& prev, const MetricField& m, const VectorField& U, Exec ex) {
    const ChartGrid& grid = m.grid();
    Frame2 fr{VectorField(grid), VectorField(grid), prev.seed, prev.fallback_points};
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const Mat3& g = m.g[p];
        const Vec3& u = U[p];
        Vec3 x = prev.X[p] - gdot(g, prev.X[p], u) * u;
        x /= std::sqrt(gdot(g, x, x));
        fr.X[p] = x;
        fr.Y[p] = cross_g(m.ginv[p], m.sqrt_det[p], u, x);
    });
    return fr;
}

FoliationDiagnostics diagnostics(const MetricField& m, const ChristoffelField& gamma, const VectorField& U,
                                 const Frame2& fr, Exec ex) {
    const ChartGrid& grid = m.grid();
    const auto A = cov_jacobian(gamma, U, ex);
    const auto L = lie_metric(m, U, ex);
    const auto dUX = cov_deriv(gamma, U, fr.X, ex);
    const auto dUY = cov_deriv(gamma, U, fr.Y, ex);
    const auto dXY = cov_deriv(gamma, fr.X, fr.Y, ex);
    const auto dYX = cov_deriv(gamma, fr.Y, fr.X, ex);
    FoliationDiagnostics d{ComplexField(grid), ComplexField(grid), ComplexField(grid), ComplexField(grid),
                           VectorField(grid),  ScalarField(grid),  ScalarField(grid)};
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const Mat3& g = m.g[p];
        const CVec3 Z = fr.Z(p);
        const CVec3 Zb = Z.conjugate();
        const Eigen::Matrix3cd Ac = A[p].cast<cplx>();
        d.sigma[p] = cg(g, Ac * Z, Z);
        d.sigma_lie[p] = 0.5 * cplx(Z.transpose() * (L[p].cast<cplx>() * Z));
        d.rho[p] = cg(g, Ac * Zb, Z);
        const CVec3 dUZ = dUX[p].cast<cplx>() - cplx(0, 1) * dUY[p].cast<cplx>();
        d.tau[p] = cg(g, dUZ, Zb);
        d.mu[p] = A[p] * U[p];
        // g(U, nabla_X X) = -g(nabla_X U, X) on an orthogonal frame
        d.nu[p] = -(gdot(g, A[p] * fr.X[p], fr.X[p]) + gdot(g, A[p] * fr.Y[p], fr.Y[p]));
        d.im_rho[p] = gdot(g, U[p], dXY[p] - dYX[p]);
    });
    return d;
}

FoliationDiagnostics diagnostics(const MetricField& m, const VectorField& U, const Frame2& frame, Exec ex) {
    return diagnostics(m, christoffel3(m, ex), U, frame, ex);
}

DiagSummary summarize(const FoliationDiagnostics& d, const MetricField& m, const Region& r) {
    const ChartGrid& grid = m.grid();
    DiagSummary s;
    s.min_abs_nu = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (!r.contains(grid, p)) continue;
        s.max_sigma = std::max(s.max_sigma, std::abs(d.sigma[p]));
        s.max_im_rho = std::max(s.max_im_rho, std::abs(d.im_rho[p]));
        s.min_abs_nu = std::min(s.min_abs_nu, std::abs(d.nu[p]));
        s.max_mu = std::max(s.max_mu, std::sqrt(gdot(m.g[p], d.mu[p], d.mu[p])));
    }
    return s;
}

ConformalityReport conformality_report(const FoliationDiagnostics& d, const MetricField& m, double tol,
                                       const Region& r) {
    const auto s = summarize(d, m, r);
    return {s.max_sigma < tol, s.max_im_rho < tol, s.max_sigma, s.max_im_rho};
}

}  // namespace sfr
