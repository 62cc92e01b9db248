#include "sfr/semiconformal.hpp"

#include <cmath>
#include <numbers>

#include "sfr/fd.hpp"

namespace sfr {

namespace {

constexpr double kPi = std::numbers::pi;

std::array<ScalarField, 2> parts(const ComplexField& w, Exec ex) {
    return {map_field<double>(w, [](const cplx& z, std::size_t) { return z.real(); }, ex),
            map_field<double>(w, [](const cplx& z, std::size_t) { return z.imag(); }, ex)};
}

// rows: components of phi, columns: chart derivatives
using Jac = Eigen::Matrix<double, 2, 3>;

Field<Jac> map_jacobian(const ComplexField& w, Exec ex) {
    const auto d = gradient(w, ex);
    Field<Jac> J(w.grid);
    for_each_index(w.size(), ex, [&](std::size_t p) {
        for (int i = 0; i < 3; ++i) {
            J[p](0, i) = d[i][p].real();
            J[p](1, i) = d[i][p].imag();
        }
    });
    return J;
}

// Gauss-Legendre nodes and weights on [-1, 1]
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1;
            dp = n * (z * p1 - p0) / (z * z - 1);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2 / ((1 - z * z) * dp * dp);
    }
}

double trapezoid_weight(const Axis& ax, int i) {
    if (ax.periodic) return ax.h();
    return (i == 0 || i == ax.n - 1) ? 0.5 * ax.h() : ax.h();
}

}  // namespace

double codomain_factor(Codomain c, cplx w) { return c == Codomain::Plane ? 1.0 : 2.0 / (1.0 + std::norm(w)); }

std::pair<double, double> codomain_dlog(Codomain c, cplx w) {
    if (c == Codomain::Plane) return {0.0, 0.0};
    const double d = 1.0 + std::norm(w);
    return {-2 * w.real() / d, -2 * w.imag() / d};
}

ScAnalysis sc_analysis(const SurfaceMap& phi, const MetricField& m, Exec ex) {
    const ChartGrid& g = phi.w.grid;
    const auto J = map_jacobian(phi.w, ex);
    ScAnalysis a{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)};
    for_each_index(g.size(), ex, [&](std::size_t p) {
        const double s = codomain_factor(phi.codomain, phi.w[p]);
        const Eigen::Matrix2d B = s * s * J[p] * m.ginv[p] * J[p].transpose();
        const double tr = B.trace(), det = std::max(0.0, B.determinant());
        const double disc = std::sqrt(std::max(0.0, tr * tr - 4 * det));
        const double l1 = std::sqrt(0.5 * (tr + disc)), l2 = std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
        a.lambda1[p] = l1;
        a.lambda2[p] = l2;
        a.energy[p] = 0.5 * tr;
        a.jacobian[p] = l1 * l2;
        const double diff = l1 + l2 > 0 ? disc / (l1 + l2) : 0.0;
        a.defect[p] = 0.5 * diff * diff;
    });
    return a;
}

double functional_I(const ScAnalysis& a, const MetricField& m) {
    const ChartGrid& g = a.defect.grid;
    double sum = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto c = g.ijk(p);
        const double w = trapezoid_weight(g.axis(0), c[0]) * trapezoid_weight(g.axis(1), c[1]) *
                         trapezoid_weight(g.axis(2), c[2]);
        sum += w * std::pow(a.defect[p], 1.5) * m.sqrt_det[p];
    }
    return sum;
}

double functional_I(const SurfaceMap& phi, const MetricField& m, Exec ex) {
    return functional_I(sc_analysis(phi, m, ex), m);
}

ComplexField tension(const SurfaceMap& phi, const MetricField& m, const ChristoffelField& gamma, Exec ex) {
    const auto re_im = parts(phi.w, ex);
    const TensorField H0 = hessian(gamma, re_im[0], ex), H1 = hessian(gamma, re_im[1], ex);
    const bool curved = phi.codomain != Codomain::Plane;
    Field<Jac> J;
    if (curved) J = map_jacobian(phi.w, ex);
    ComplexField tau(phi.w.grid);
    for_each_index(tau.size(), ex, [&](std::size_t p) {
        const Mat3& gi = m.ginv[p];
        double t0 = (gi.cwiseProduct(H0[p])).sum(), t1 = (gi.cwiseProduct(H1[p])).sum();
        if (curved) {
            // Gamma^a_bc = d^a_b L_c + d^a_c L_b - d_bc L_a for h = e^{2L} |dw|^2
            const auto dl = codomain_dlog(phi.codomain, phi.w[p]);
            const Eigen::Vector2d L(dl.first, dl.second);
            const Eigen::Matrix2d A = J[p] * gi * J[p].transpose();
            const Eigen::Vector2d c = 2.0 * A * L - A.trace() * L;
            t0 += c[0];
            t1 += c[1];
        }
        tau[p] = cplx(t0, t1);
    });
    return tau;
}

ComplexField tension(const SurfaceMap& phi, const MetricField& m, Exec ex) {
    return tension(phi, m, christoffel3(m, ex), ex);
}

ComplexField apply_dphi(const SurfaceMap& phi, const VectorField& V, Exec ex) {
    const auto d = gradient(phi.w, ex);
    ComplexField out(phi.w.grid);
    for_each_index(out.size(), ex, [&](std::size_t p) { out[p] = V[p][0] * d[0][p] + V[p][1] * d[1][p] + V[p][2] * d[2][p]; });
    return out;
}

FundResidual fund_residual(const SurfaceMap& phi, const MetricField& m, const VectorField& U, double defect_tol,
                           Exec ex) {
    const auto gamma = christoffel3(m, ex);
    const ComplexField tau = tension(phi, m, gamma, ex);
    const ComplexField dmu = apply_dphi(phi, cov_deriv(gamma, U, U, ex), ex);
    const auto a = sc_analysis(phi, m, ex);
    FundResidual r{ComplexField(phi.w.grid), std::vector<char>(phi.w.size(), 0)};
    for_each_index(r.residual.size(), ex, [&](std::size_t p) {
        r.residual[p] = tau[p] + dmu[p];
        r.applicable[p] = a.defect[p] <= defect_tol && a.lambda1[p] > 0;
    });
    return r;
}

ClosedSurfaceMesh sphere_mesh(const Vec3& c, double R, int na, int nb) {
    ClosedSurfaceMesh s;
    s.embed = [c, R](double a, double b) {
        return Vec3(c + R * Vec3(std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)));
    };
    s.tangents = [R](double a, double b) {
        return std::pair<Vec3, Vec3>{
            R * Vec3(std::cos(a) * std::cos(b), std::cos(a) * std::sin(b), -std::sin(a)),
            R * Vec3(-std::sin(a) * std::sin(b), std::sin(a) * std::cos(b), 0)};
    };
    s.na = na;
    s.nb = nb;
    return s;
}

ClosedSurfaceMesh ellipsoid_mesh(const Vec3& c, const Vec3& ax, int na, int nb) {
    ClosedSurfaceMesh s = sphere_mesh(Vec3::Zero(), 1.0, na, nb);
    auto unit = s.embed;
    auto tan = s.tangents;
    s.embed = [=](double a, double b) { return Vec3(c + ax.cwiseProduct(unit(a, b))); };
    s.tangents = [=](double a, double b) {
        const auto t = tan(a, b);
        return std::pair<Vec3, Vec3>{ax.cwiseProduct(t.first), ax.cwiseProduct(t.second)};
    };
    return s;
}

ClosedSurfaceMesh torus_mesh(const Vec3& c, const Vec3& e1, const Vec3& e2, double R, double r, int na, int nb) {
    const Vec3 u1 = e1.normalized();
    const Vec3 u2 = (e2 - e2.dot(u1) * u1).normalized();
    const Vec3 u3 = u1.cross(u2);
    ClosedSurfaceMesh s;
    s.a_periodic = true;
    s.a_min = 0;
    s.a_max = 2 * kPi;
    s.na = na;
    s.nb = nb;
    // a: around the tube, b: along the core circle; x_a x x_b points away from the core
    s.embed = [=](double a, double b) {
        const Vec3 radial = std::cos(b) * u1 + std::sin(b) * u2;
        return Vec3(c + (R + r * std::cos(a)) * radial - r * std::sin(a) * u3);
    };
    s.tangents = [=](double a, double b) {
        const Vec3 radial = std::cos(b) * u1 + std::sin(b) * u2;
        const Vec3 dradial = -std::sin(b) * u1 + std::cos(b) * u2;
        return std::pair<Vec3, Vec3>{Vec3(-r * std::sin(a) * radial - r * std::cos(a) * u3),
                                     Vec3((R + r * std::cos(a)) * dradial)};
    };
    return s;
}

double charge_Q(const ChargeInputs& in, const ClosedSurfaceMesh& S) {
    if (!S.embed || !in.lambda || !in.U) throw SchemaError("charge_Q: surface, lambda and U are required");
    if (S.na < 2 || S.nb < 3) throw SchemaError("charge_Q: too few surface nodes");
    std::vector<double> an, aw;
    if (S.a_periodic) {
        for (int i = 0; i < S.na; ++i) {
            an.push_back(S.a_min + (S.a_max - S.a_min) * i / S.na);
            aw.push_back((S.a_max - S.a_min) / S.na);
        }
    } else {
        gauss_legendre(S.na, an, aw);
        const double half = 0.5 * (S.a_max - S.a_min), mid = 0.5 * (S.a_max + S.a_min);
        for (int i = 0; i < S.na; ++i) {
            an[i] = mid + half * an[i];
            aw[i] *= half;
        }
    }
    const double wb = 2 * kPi / S.nb;
    auto tangents = [&](double a, double b) {
        if (S.tangents) return S.tangents(a, b);
        const double h = 1e-3;
        auto d = [&](int which) {
            auto at = [&](double e) { return which == 0 ? S.embed(a + e, b) : S.embed(a, b + e); };
            return Vec3((at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12 * h));
        };
        return std::pair<Vec3, Vec3>{d(0), d(1)};
    };
    const double da = S.a_periodic ? aw[0] : (S.a_max - S.a_min) / S.na;
    double Q = 0;
    for (int i = 0; i < S.na; ++i) {
        for (int j = 0; j < S.nb; ++j) {
            const double a = an[i], b = wb * j;
            const Vec3 x = S.embed(a, b);
            const auto t = tangents(a, b);
            // the surface between nodes can come closer than the nodes themselves
            const double spacing = t.first.norm() * da + t.second.norm() * wb;
            if (in.singular_distance && in.singular_distance(x) < std::max(in.min_distance, spacing))
                throw DomainError("charge_Q: surface passes within the declared singular set");
            const Vec3 nu = t.first.cross(t.second);
            const double lam = in.lambda(x);
            const Vec3 U = in.U(x);
            const double sd = in.g ? std::sqrt(in.g(x).determinant()) : 1.0;
            const double v = lam * lam * U.dot(nu) * sd;
            if (!std::isfinite(v)) throw DomainError("charge_Q: non-finite integrand, surface too close to a singularity");
            Q += aw[i] * wb * v;
        }
    }
    return Q;
}

double charge_Q(const ScalarField& lambda, const VectorField& U, const MetricField& m, const ClosedSurfaceMesh& S,
                const std::function<double(const Vec3&)>& singular_distance, double min_distance) {
    ChargeInputs in;
    auto inside = [&](const Vec3& x) {
        if (!lambda.grid.contains(x)) throw DomainError("charge_Q: surface leaves the chart");
    };
    in.lambda = [&](const Vec3& x) {
        inside(x);
        return interpolate(lambda, x);
    };
    in.U = [&](const Vec3& x) { return interpolate(U, x); };
    in.g = [&](const Vec3& x) { return interpolate(m.g, x); };
    in.singular_distance = singular_distance;
    in.min_distance = min_distance;
    return charge_Q(in, S);
}

namespace {

double diameter(const ChartGrid& g) {
    double d = 0;
    for (int a = 0; a < 3; ++a) d += std::pow(g.axis(a).max - g.axis(a).min, 2);
    return std::sqrt(d);
}

// signed distance to the plane of Sigma, wrapped on periodic axes
double plane_offset(const ChartGrid& g, const SliceSurface& sg, const Vec3& y) {
    double d = y[sg.axis] - sg.value;
    const Axis& ax = g.axis(sg.axis);
    if (ax.periodic) {
        const double P = ax.max - ax.min;
        d = std::remainder(d, P);
    }
    return d;
}

bool side_ok(const ChartGrid& g, const SliceSurface& sg, const Vec3& y) {
    if (sg.side < 0) return true;
    const Axis& ax = g.axis(sg.side);
    double v = y[sg.side];
    if (ax.periodic) v = ax.min + std::fmod(std::fmod(v - ax.min, ax.max - ax.min) + (ax.max - ax.min), ax.max - ax.min);
    return v > sg.side_min;
}

}  // namespace

namespace {

// Tricubic interpolation that also accepts points up to `reach` grid steps outside bounded faces,
// so curves can be followed onto a Sigma lying on the chart boundary.
template <class T>
std::optional<T> sample_near(const Field<T>& f, const Vec3& x, double reach) {
    const ChartGrid& g = f.grid;
    int base[3];
    double w[3][4];
    for (int a = 0; a < 3; ++a) {
        const Axis& ax = g.axis(a);
        double xi = (x[a] - ax.min) / ax.h();
        if (ax.periodic) {
            xi = std::fmod(xi, double(ax.n));
            if (xi < 0) xi += ax.n;
        } else if (xi < -reach || xi > ax.n - 1 + reach) {
            return std::nullopt;
        }
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
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k)
                acc += (w[0][i] * w[1][j] * w[2][k]) * f[g.index(wrap(0, base[0] + i), wrap(1, base[1] + j), wrap(2, base[2] + k))];
    return acc;
}

}  // namespace

// Points whose whole index cube of half-width r is set in mask.
std::vector<char> erode(const ChartGrid& g, const std::vector<char>& mask, int r, Exec ex) {
    std::vector<char> out(g.size(), 0);
    for_each_index(g.size(), ex, [&](std::size_t p) {
        const auto c = g.ijk(p);
        for (int di = -r; di <= r; ++di)
            for (int dj = -r; dj <= r; ++dj)
                for (int dk = -r; dk <= r; ++dk) {
                    int q[3] = {c[0] + di, c[1] + dj, c[2] + dk};
                    bool skip = false;
                    for (int a = 0; a < 3; ++a) {
                        const int n = g.n(a);
                        if (g.axis(a).periodic) q[a] = ((q[a] % n) + n) % n;
                        else if (q[a] < 0 || q[a] >= n) skip = true;
                    }
                    if (!skip && !mask[g.index(q[0], q[1], q[2])]) return;
                }
        out[p] = 1;
    });
    return out;
}

PhiRate phi_rate(const SurfaceMap& phi, const Slice& s, const SliceSurface& sg, const PhiEvolutionOptions& opt,
                 Exec ex, const std::vector<char>* trusted) {
    const ChartGrid& g = phi.w.grid;
    if (sg.axis < 0 || sg.axis > 2 || sg.side > 2 || sg.side == sg.axis)
        throw SchemaError("phi_rate: Sigma must be a coordinate plane with an optional side condition on another axis");
    const auto gamma = christoffel3(s.g, ex);
    ComplexField G = tension(phi, s.g, gamma, ex);
    if (!s.f.data.empty()) {
        const ComplexField df = apply_dphi(phi, grad_scalar(s.g, s.f, ex), ex);
        for (std::size_t p = 0; p < G.size(); ++p) G[p] += df[p];
    }
    const double ds = opt.ds > 0 ? opt.ds : 0.5 * std::min({g.h(0), g.h(1), g.h(2)});
    const double budget = opt.budget_diameters * diameter(g);

    struct State {
        Vec3 y;
        cplx J;
    };
    // second derivatives reach 4 nodes, the interpolation stencil 2 more
    std::vector<char> clean;
    if (trusted) clean = erode(g, *trusted, 6, ex);
    auto nearest_clean = [&](const Vec3& y) {
        int c[3];
        for (int a = 0; a < 3; ++a) {
            const Axis& ax = g.axis(a);
            int i = static_cast<int>(std::lround((y[a] - ax.min) / ax.h()));
            c[a] = ax.periodic ? ((i % ax.n) + ax.n) % ax.n : std::clamp(i, 0, ax.n - 1);
        }
        return clean[g.index(c[0], c[1], c[2])] != 0;
    };
    auto deriv = [&](const Vec3& y, Vec3& dy, cplx& dJ) {
        const auto u = sample_near(s.U, y, opt.reach);
        if (!u) return false;
        if (trusted && !nearest_clean(y)) return false;
        dy = -*u;
        dJ = *sample_near(G, y, opt.reach);
        return true;
    };
    auto rk4 = [&](const State& a, double h, State& out) {
        Vec3 k1, k2, k3, k4;
        cplx j1, j2, j3, j4;
        if (!deriv(a.y, k1, j1)) return false;
        if (!deriv(Vec3(a.y + 0.5 * h * k1), k2, j2)) return false;
        if (!deriv(Vec3(a.y + 0.5 * h * k2), k3, j3)) return false;
        if (!deriv(Vec3(a.y + h * k3), k4, j4)) return false;
        out.y = a.y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        out.J = a.J + h / 6 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
        return true;
    };

    PhiRate r{ComplexField(g), std::vector<char>(g.size(), 0)};
    for_each_index(g.size(), ex, [&](std::size_t p) {
        State cur{g.point(p), 0.0};
        const double d0 = plane_offset(g, sg, cur.y);
        if (std::abs(d0) < 1e-12 * (1 + std::abs(sg.value)) && side_ok(g, sg, cur.y)) {
            r.dphi_dt[p] = 0.0;
            r.valid[p] = 1;
            return;
        }
        double travelled = 0;
        while (travelled < budget) {
            State next;
            if (!rk4(cur, ds, next)) return;
            const double d1 = plane_offset(g, sg, cur.y), d2 = plane_offset(g, sg, next.y);
            const bool crosses = ((d1 > 0 && d2 <= 0) || (d1 < 0 && d2 >= 0)) && std::abs(d2 - d1) < 2 * ds;
            if (crosses) {
                // step length to the plane by safeguarded secant on the RK4 step
                double lo = 0, hi = ds, flo = d1, fhi = d2;
                State hit = next;
                for (int it = 0; it < 60; ++it) {
                    double sgm = hi - fhi * (hi - lo) / (fhi - flo);
                    if (!(sgm > lo && sgm < hi)) sgm = 0.5 * (lo + hi);
                    State trial;
                    if (!rk4(cur, sgm, trial)) return;
                    const double ft = plane_offset(g, sg, trial.y);
                    hit = trial;
                    if (std::abs(ft) < 1e-14 * (1 + std::abs(sg.value)) || hi - lo < 1e-15) break;
                    if ((ft < 0) == (flo < 0)) {
                        lo = sgm;
                        flo = ft;
                    } else {
                        hi = sgm;
                        fhi = ft;
                    }
                }
                if (side_ok(g, sg, hit.y)) {
                    const Vec3 U = *sample_near(s.U, hit.y, opt.reach);
                    const Mat3 gi = *sample_near(s.g.ginv, hit.y, opt.reach);
                    if (std::abs(U[sg.axis]) / std::sqrt(gi(sg.axis, sg.axis)) < sg.min_transversality) return;
                    r.dphi_dt[p] = -hit.J;
                    r.valid[p] = 1;
                    return;
                }
            }
            cur = next;
            travelled += ds;
        }
    });
    return r;
}

PhiStack evolve_phi(const SurfaceMap& phi0, const Trajectory& traj, const SliceSurface& sg,
                    const PhiEvolutionOptions& opt, Exec ex) {
    if (traj.slices.empty()) throw SchemaError("evolve_phi: trajectory has no stored slices");
    if (!(traj.slices.front().grid() == phi0.w.grid)) throw SchemaError("evolve_phi: map and trajectory grids differ");
    PhiStack st;
    st.t.push_back(traj.slices.front().t);
    st.maps.push_back(phi0);
    st.valid.emplace_back(phi0.w.size(), 1);
    for (std::size_t n = 0; n + 1 < traj.slices.size(); ++n) {
        const Slice& a = traj.slices[n];
        const Slice& b = traj.slices[n + 1];
        const double dt = b.t - a.t;
        const SurfaceMap& cur = st.maps.back();
        const PhiRate k1 = phi_rate(cur, a, sg, opt, ex, &st.valid.back());
        SurfaceMap mid = cur;
        std::vector<char> mid_ok = st.valid.back();
        for (std::size_t p = 0; p < mid.w.size(); ++p) {
            mid.w[p] += dt * k1.dphi_dt[p];
            mid_ok[p] = mid_ok[p] && k1.valid[p];
        }
        const PhiRate k2 = phi_rate(mid, b, sg, opt, ex, &mid_ok);
        SurfaceMap next = cur;
        std::vector<char> valid = st.valid.back();
        for (std::size_t p = 0; p < next.w.size(); ++p) {
            next.w[p] += 0.5 * dt * (k1.dphi_dt[p] + k2.dphi_dt[p]);
            valid[p] = valid[p] && k1.valid[p] && k2.valid[p];
        }
        st.t.push_back(b.t);
        st.maps.push_back(std::move(next));
        st.valid.push_back(std::move(valid));
    }
    return st;
}

ComplexField evolution_residual(const SurfaceMap& phi, const ComplexField& dphi_dt, const Slice& s, Exec ex) {
    const auto gamma = christoffel3(s.g, ex);
    ComplexField r = tension(phi, s.g, gamma, ex);
    const auto d = gradient(dphi_dt, ex);
    ComplexField df;
    if (!s.f.data.empty()) df = apply_dphi(phi, grad_scalar(s.g, s.f, ex), ex);
    for_each_index(r.size(), ex, [&](std::size_t p) {
        const Vec3& U = s.U[p];
        r[p] += U[0] * d[0][p] + U[1] * d[1][p] + U[2] * d[2][p];
        if (!df.data.empty()) r[p] += df[p];
    });
    return r;
}

}  // namespace sfr
