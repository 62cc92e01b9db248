#include "sfr/flows.hpp"

#include "sfr/field_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sfr {

namespace {

Vec3 dvec(const std::array<ScalarField, 3>& d, std::size_t p) { return {d[0][p], d[1][p], d[2][p]}; }

Mat3 projector(const Vec3& u, const Vec3& theta) { return Mat3::Identity() - u * theta.transpose(); }

// 2 a.b symmetrised: (a (x) b + b (x) a)
Mat3 sym2(const Vec3& a, const Vec3& b) { return a * b.transpose() + b * a.transpose(); }

cplx quad(const Mat3& T, const CVec3& a, const CVec3& b) { return a.transpose() * (T.cast<cplx>() * b); }

std::string where(const ChartGrid& g, std::size_t p) {
    const Vec3 x = g.point(p);
    std::ostringstream os;
    os << "grid point " << p << " (" << x[0] << ", " << x[1] << ", " << x[2] << ")";
    return os.str();
}

double g_norm(const Mat3& g, const Vec3& v) { return std::sqrt(std::max(0.0, v.dot(g * v))); }

TensorField sfr_T(const Slice& s, Exec ex) {
    const auto L = lie_metric(s.g, s.U, ex);
    const auto df = gradient(s.f, ex);
    TensorField T(s.grid());
    for_each_index(T.size(), ex, [&](std::size_t p) {
        const Vec3& u = s.U[p];
        const Vec3 th = s.g.g[p] * u;
        const Mat3 P = projector(u, th);
        const Vec3 d = dvec(df, p);
        const Vec3 a = d - u.dot(d) * th;
        T[p] = sym(-0.5 * s.f[p] * P.transpose() * L[p] * P - 0.5 * sym2(th, a));
    });
    return T;
}

// ---- IntegrableCFGR: K = dt_g from the implicit relation K = -(4/nu) P curv_R(K) P ----

struct NodeCoef {
    Mat3 P, C, A, R2, trans;
    Vec3 theta, Uu;
    double nu = 0, ua = 1;
};

// U(K) = -(nu/2) K + 2 P'Ric P + P'(C'K + KC)P - 1/2 P'(KA + A'K)P - w theta' - theta w', w = K U(u)
Mat3 march_rhs(const NodeCoef& c, const Mat3& K) {
    const Mat3 inner = -0.5 * c.nu * K + c.C.transpose() * K + K * c.C - 0.5 * (K * c.A + c.A.transpose() * K);
    const Vec3 w = K * c.Uu;
    const Mat3 UK = c.P.transpose() * inner * c.P + c.R2 - w * c.theta.transpose() - c.theta * w.transpose();
    return (UK - c.trans) / c.ua;
}

}  // namespace

std::string to_string(FlowVariant v) {
    switch (v) {
        case FlowVariant::SFR: return "SFR";
        case FlowVariant::ConstCurvCFGR: return "ConstCurvCFGR";
        case FlowVariant::IntegrableCFGR: return "IntegrableCFGR";
        case FlowVariant::Custom: return "Custom";
    }
    return "?";
}

FlowVariant parse_variant(const std::string& s) {
    for (auto v : {FlowVariant::SFR, FlowVariant::ConstCurvCFGR, FlowVariant::IntegrableCFGR, FlowVariant::Custom})
        if (std::ranges::equal(s, to_string(v), [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return v;
    throw SchemaError("unknown flow variant '" + s + "'");
}

void FlowSpec::validate() const {
    if (!(dt > 0)) throw SchemaError("flow: dt must be > 0");
    if (!(t_end > 0)) throw SchemaError("flow: t_end must be > 0");
    if (store_every < 1 || monitor_every < 1) throw SchemaError("flow: store_every and monitor_every must be >= 1");
    if (variant == FlowVariant::IntegrableCFGR && !lapse.is_unit())
        throw SchemaError("flow: IntegrableCFGR requires lapse f = 1");
    if (variant == FlowVariant::Custom && !custom_T) throw SchemaError("flow: Custom variant needs custom_T");
}

IntegrableSolve solve_integrable_K(const Slice& s, const IntegrableOptions& opt, Exec ex) {
    const ChartGrid& grid = s.grid();
    const auto gamma = christoffel3(s.g, ex);
    const auto c3 = curvature3(s.g, gamma, ex, false);
    const auto J = jacobian(s.U, ex);
    const auto A = cov_jacobian(gamma, s.U, ex);

    std::vector<NodeCoef> coef(grid.size());
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        NodeCoef& c = coef[p];
        const Vec3& u = s.U[p];
        c.theta = s.g.g[p] * u;
        c.P = projector(u, c.theta);
        for (int l = 0; l < 3; ++l) c.C.row(l) = (gamma[p].G[l] * u).transpose();
        c.A = A[p];
        c.R2 = 2.0 * c.P.transpose() * c3.ricci[p] * c.P;
        c.Uu = J[p] * u;
        c.nu = -(A[p].trace() - c.theta.dot(A[p] * u));
        c.trans = Mat3::Zero();
    });

    std::size_t worst = 0;
    for (std::size_t p = 0; p < grid.size(); ++p)
        if (std::abs(coef[p].nu) < std::abs(coef[worst].nu)) worst = p;
    if (!(std::abs(coef[worst].nu) >= opt.nu_min)) {
        std::ostringstream os;
        os << "IntegrableCFGR: |nu| = " << std::abs(coef[worst].nu) << " below " << opt.nu_min << " at "
           << where(grid, worst);
        throw DegeneracyError(os.str());
    }

    // marching axis: non-periodic, U^a of one sign, largest min |U^a|
    int axis = -1;
    double best = 0;
    for (int a = 0; a < 3; ++a) {
        if (grid.axis(a).periodic) continue;
        double lo = std::numeric_limits<double>::infinity(), sgn = 0;
        bool ok = true;
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const double v = s.U[p][a];
            if (sgn == 0) sgn = v > 0 ? 1 : -1;
            if (v * sgn <= 0) { ok = false; break; }
            lo = std::min(lo, std::abs(v));
        }
        if (ok && lo > best) { best = lo; axis = a; }
    }
    if (axis < 0) throw DegeneracyError("IntegrableCFGR: no non-periodic chart axis along which U has fixed sign");
    for (std::size_t p = 0; p < grid.size(); ++p) coef[p].ua = s.U[p][axis];

    const int n = grid.n(axis);
    const double h = grid.h(axis);
    const bool forward = s.U[0][axis] > 0;
    const int b1 = (axis + 1) % 3, b2 = (axis + 2) % 3;
    const std::size_t stride = grid.stride(axis);

    IntegrableSolve out{TensorField(grid, Mat3::Zero()), 0, 0, axis};
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        const auto dK1 = partial(out.K, b1, ex), dK2 = partial(out.K, b2, ex);
        for_each_index(grid.size(), ex, [&](std::size_t p) {
            coef[p].trans = s.U[p][b1] * dK1[p] + s.U[p][b2] * dK2[p];
        });
        TensorField K(grid, Mat3::Zero());
        const int nl = grid.n(b1) * grid.n(b2);
        for_each_index(static_cast<std::size_t>(nl), ex, [&](std::size_t line) {
            int c[3];
            c[axis] = 0;
            c[b1] = static_cast<int>(line) / grid.n(b2);
            c[b2] = static_cast<int>(line) % grid.n(b2);
            const std::size_t base = grid.index(c[0], c[1], c[2]);
            auto node = [&](int j) -> const NodeCoef& { return coef[base + j * stride]; };
            // G at fractional index xi: cubic interpolation of the node right-hand sides
            auto G = [&](double xi, const Mat3& Kv) {
                const double r = std::round(xi);
                if (std::abs(xi - r) < 1e-12) return march_rhs(node(static_cast<int>(r)), Kv);
                const int b = std::clamp(static_cast<int>(std::floor(xi)) - 1, 0, n - 4);
                double w[4];
                detail::cubic_weights(xi, b, w);
                Mat3 acc = Mat3::Zero();
                for (int m = 0; m < 4; ++m) acc += w[m] * march_rhs(node(b + m), Kv);
                return acc;
            };
            const int j0 = forward ? 0 : n - 1;
            const int dj = forward ? 1 : -1;
            const double step = dj * h;
            Mat3 Kc = Mat3::Zero();
            K[base + j0 * stride] = Kc;
            for (int j = j0; j + dj >= 0 && j + dj < n; j += dj) {
                const double x = j;
                const Mat3 k1 = G(x, Kc);
                const Mat3 k2 = G(x + 0.5 * dj, Kc + 0.5 * step * k1);
                const Mat3 k3 = G(x + 0.5 * dj, Kc + 0.5 * step * k2);
                const Mat3 k4 = G(x + dj, Kc + step * k3);
                Kc += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                Kc = sym(Kc);
                K[base + (j + dj) * stride] = Kc;
            }
        });
        double change = 0, scale = 0;
        for (std::size_t p = 0; p < grid.size(); ++p) {
            change = std::max(change, (K[p] - out.K[p]).cwiseAbs().maxCoeff());
            scale = std::max(scale, K[p].cwiseAbs().maxCoeff());
        }
        out.K = std::move(K);
        out.sweeps = sweep + 1;
        out.last_change = change;
        if (change <= opt.sweep_tol * (1 + scale)) break;
    }
    // the relation keeps K(U, .) = 0; remove the truncation-level remainder
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        out.K[p] = sym(coef[p].P.transpose() * out.K[p] * coef[p].P);
    });
    return out;
}

TensorField build_T(const Slice& s, const FlowSpec& spec, Exec ex) {
    switch (spec.variant) {
        case FlowVariant::SFR: return sfr_T(s, ex);
        case FlowVariant::ConstCurvCFGR: return TensorField(s.grid(), Mat3::Zero());
        case FlowVariant::IntegrableCFGR: {
            auto K = solve_integrable_K(s, spec.integrable, ex).K;
            for (auto& k : K.data) k *= 0.5;
            return K;
        }
        case FlowVariant::Custom: return spec.custom_T(s);
    }
    return {};
}

FlowRHS flow_rhs(const Slice& s, const FlowSpec& spec, Exec ex) {
    const ChartGrid& grid = s.grid();
    FlowRHS r{VectorField(grid), TensorField(grid), build_T(s, spec, ex)};
    const auto gamma = christoffel3(s.g, ex);
    const auto nUU = cov_deriv(gamma, s.U, s.U, ex);
    const auto df = gradient(s.f, ex);
    const bool literal = spec.variant == FlowVariant::Custom;
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const Vec3& u = s.U[p];
        const Vec3 th = s.g.g[p] * u;
        const Vec3 d = dvec(df, p);
        r.dt_g[p] = sym(-sym2(th, d) + 2.0 * r.T[p]);
        if (literal) {
            r.dt_U[p] = -s.f[p] * nUU[p] + s.g.ginv[p] * d;
        } else {
            // projected form; keeps g(U,U) = 1 invariant for the semi-discrete system
            r.dt_U[p] = -s.f[p] * (projector(u, th) * nUU[p]) - 0.5 * (s.g.ginv[p] * (r.dt_g[p] * u));
        }
    });
    return r;
}

ComplexField spacetime_shear(const Slice& s, const TensorField& K, const Frame2& fr, Exec ex) {
    const auto gamma3 = christoffel3(s.g, ex);
    const auto G4 = christoffel4(s, K, gamma3, ex);
    const auto fU = map_field<Vec3>(s.U, [&](const Vec3& u, std::size_t p) { return Vec3(s.f[p] * u); }, ex);
    const auto J = jacobian(fU, ex);
    ComplexField out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const CVec3 Z = fr.Z(p);
        const Vec4 W(1.0, fU[p][0], fU[p][1], fU[p][2]);
        CVec3 v = J[p].cast<cplx>() * Z;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i) {
                double c = 0;
                for (int b = 0; b < 4; ++b) c += G4[p].G[k + 1](i + 1, b) * W[b];
                v[k] += Z[i] * c;
            }
        out[p] = 2.0 * cplx(v.transpose() * (s.g.g[p].cast<cplx>() * Z));
    });
    return out;
}

MonitorRecord monitor_slice(const Slice& s, const FlowRHS& rhs, const FlowSpec& spec, const Frame2* frame, Exec ex) {
    const ChartGrid& grid = s.grid();
    const Region region{spec.margin};
    MonitorRecord m;
    m.t = s.t;
    std::vector<std::size_t> pts;
    for (std::size_t p = 0; p < grid.size(); ++p)
        if (region.contains(grid, p)) pts.push_back(p);
    auto over = [&](auto&& fn) { return max_over(pts.size(), ex, [&](std::size_t i) { return fn(pts[i]); }); };

    m.unit = over([&](std::size_t p) { return std::abs(s.U[p].dot(s.g.g[p] * s.U[p]) - 1); });
    const auto ray = ray_derivs(s, rhs.dt_U, rhs.dt_g, ex);
    m.ray = over([&](std::size_t p) {
        const Vec4& v = ray.first[p];
        const Vec3 sp = v.tail<3>();
        return std::sqrt(s.f[p] * s.f[p] * v[0] * v[0] + sp.dot(s.g.g[p] * sp));
    });
    const auto gd = geodesic_defect(s, rhs.T, ex);
    m.geodesic = over([&](std::size_t p) { return g_norm(s.g.g[p], gd[p]); });

    Frame2 local;
    if (!frame) {
        local = complementary_frame(s.g, s.U, spec.frame_seed, std::numeric_limits<double>::infinity(), ex);
        frame = &local;
    }
    const auto d = diagnostics(s.g, s.U, *frame, ex);
    const auto sum = summarize(d, s.g, region);
    m.max_sigma = sum.max_sigma;
    m.max_im_rho = sum.max_im_rho;
    m.min_abs_nu = sum.min_abs_nu;
    if (spec.variant == FlowVariant::SFR)
        m.sfr_identity = over([&](std::size_t p) {
            const CVec3 Z = frame->Z(p);
            return std::abs(s.f[p] * d.sigma[p] + quad(rhs.T[p], Z, Z));
        });
    if (spec.shear4) {
        const auto sh = spacetime_shear(s, rhs.dt_g, *frame, ex);
        m.shear4 = over([&](std::size_t p) { return std::abs(sh[p]); });
    }
    return m;
}

namespace {

// Non-empty message when a monitor exceeds its tolerance.
std::string breach(const MonitorRecord& m, const FlowSpec& spec, double nu0) {
    const auto& tol = spec.tol;
    std::ostringstream os;
    os << std::setprecision(3);
    auto chk = [&](const char* name, double v, double lim) {
        if (os.tellp() == 0 && !(v <= lim)) os << name << " = " << v << " exceeds " << lim;
    };
    chk("unit-norm defect", m.unit, tol.unit);
    if (spec.variant == FlowVariant::Custom) return os.str();
    chk("ray derivative", m.ray, tol.ray);
    chk("geodesic defect", m.geodesic, tol.geodesic);
    if (spec.variant == FlowVariant::SFR) chk("SFR identity |f sigma + T(Z,Z)|", m.sfr_identity, tol.sfr_identity);
    if (spec.variant == FlowVariant::ConstCurvCFGR || spec.variant == FlowVariant::IntegrableCFGR) {
        chk("max |sigma|", m.max_sigma, tol.sigma);
        chk("max |Im rho|", m.max_im_rho, tol.im_rho);
    }
    if (spec.variant == FlowVariant::IntegrableCFGR && os.tellp() == 0 && !(m.min_abs_nu >= spec.tol.nu_ratio * nu0))
        os << "min |nu| = " << m.min_abs_nu << " fell below " << spec.tol.nu_ratio << " x initial " << nu0;
    return os.str();
}

struct State {
    TensorField g;
    VectorField U;
};

}  // namespace

Trajectory evolve(const Slice& initial, const FlowSpec& spec, Exec ex) {
    spec.validate();
    Trajectory traj;
    traj.dt = spec.dt;
    const int nsteps = static_cast<int>(std::ceil(spec.t_end / spec.dt - 1e-9));
    const ChartGrid& grid = initial.grid();

    State st{initial.g.g, initial.U};
    double t = initial.t;
    Frame2 frame;
    bool have_frame = false;
    double nu0 = 0;

    auto slice_of = [&](const State& x, double tt) { return make_slice(tt, make_metric(x.g, ex), x.U, spec.lapse); };
    auto axpy = [&](const State& x, const FlowRHS& k, double a) {
        State y{x.g, x.U};
        for_each_index(grid.size(), ex, [&](std::size_t p) {
            y.g[p] += a * k.dt_g[p];
            y.U[p] += a * k.dt_U[p];
        });
        return y;
    };
    auto store = [&](Slice s, const FlowRHS& k, int step) {
        s.T = k.T;
        s.dt_g = k.dt_g;
        traj.slices.push_back(std::move(s));
        traj.slice_steps.push_back(step);
    };

    for (int step = 0;; ++step) {
        const bool last = step == nsteps;
        Slice s;
        FlowRHS k1;
        try {
            s = slice_of(st, t);
            k1 = flow_rhs(s, spec, ex);
        } catch (const Error& e) {
            traj.halted = true;
            traj.halt_reason = "step " + std::to_string(step) + ", t = " + format_double(t) + ": " + e.what();
            return traj;
        }
        if (step % spec.monitor_every == 0 || last) {
            if (have_frame) frame = continue_frame(frame, s.g, s.U, ex);
            else frame = complementary_frame(s.g, s.U, spec.frame_seed, std::numeric_limits<double>::infinity(), ex);
            have_frame = true;
            MonitorRecord m = monitor_slice(s, k1, spec, &frame, ex);
            m.step = step;
            if (step == 0) nu0 = m.min_abs_nu;
            traj.monitors.push_back(m);
            const std::string why = breach(m, spec, nu0);
            if (!why.empty() && spec.halt_on_breach) {
                store(std::move(s), k1, step);
                traj.halted = true;
                traj.halt_reason = "step " + std::to_string(step) + ", t = " + format_double(t) + ": " + why;
                return traj;
            }
        }
        if (last) {
            store(std::move(s), k1, step);
            break;
        }
        const double h = std::min(spec.dt, initial.t + spec.t_end - t);
        try {
            const FlowRHS k2 = flow_rhs(slice_of(axpy(st, k1, 0.5 * h), t + 0.5 * h), spec, ex);
            const FlowRHS k3 = flow_rhs(slice_of(axpy(st, k2, 0.5 * h), t + 0.5 * h), spec, ex);
            const FlowRHS k4 = flow_rhs(slice_of(axpy(st, k3, h), t + h), spec, ex);
            if (step % spec.store_every == 0) store(std::move(s), k1, step);
            for_each_index(grid.size(), ex, [&](std::size_t p) {
                st.g[p] = sym(st.g[p] + h / 6.0 * (k1.dt_g[p] + 2.0 * k2.dt_g[p] + 2.0 * k3.dt_g[p] + k4.dt_g[p]));
                st.U[p] += h / 6.0 * (k1.dt_U[p] + 2.0 * k2.dt_U[p] + 2.0 * k3.dt_U[p] + k4.dt_U[p]);
            });
        } catch (const Error& e) {
            traj.halted = true;
            traj.halt_reason = "step " + std::to_string(step) + ", t = " + format_double(t) + ": " + e.what();
            return traj;
        }
        t = initial.t + (step + 1) * spec.dt;
        if (step + 1 == nsteps) t = initial.t + spec.t_end;
    }
    return traj;
}

void write_monitors_csv(const std::string& path, const std::vector<MonitorRecord>& ms) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    os << "step,t,unit,ray,geodesic,sfr_identity,shear4,max_sigma,max_im_rho,min_abs_nu\n";
    for (const auto& m : ms)
        os << m.step << ',' << format_double(m.t) << ',' << format_double(m.unit) << ',' << format_double(m.ray) << ','
           << format_double(m.geodesic) << ',' << format_double(m.sfr_identity) << ',' << format_double(m.shear4)
           << ',' << format_double(m.max_sigma) << ',' << format_double(m.max_im_rho) << ','
           << format_double(m.min_abs_nu) << '\n';
}

// ---- transport identities ----

ComplexField transport_quantity(const FoliationDiagnostics& d, TransportQuantity q) {
    return map_field<cplx>(d.sigma, [&](const cplx& sg, std::size_t p) -> cplx {
        switch (q) {
            case TransportQuantity::Sigma: return sg;
            case TransportQuantity::AbsSigmaSq: return std::norm(sg);
            case TransportQuantity::Rho: return d.rho[p];
            case TransportQuantity::ImRho: return d.rho[p].imag();
        }
        return 0.0;
    });
}

ComplexField transport_rhs(const Slice& s, const Frame2& fr, TransportQuantity q, Exec ex) {
    if (!s.T || !s.dt_g) throw DomainError("transport_rhs: slice lacks T or dt_g");
    const TensorField& T = *s.T;
    const TensorField& K = *s.dt_g;
    const auto gamma = christoffel3(s.g, ex);
    const auto c3 = curvature3(s.g, gamma, ex, false);
    const auto d = diagnostics(s.g, gamma, s.U, fr, ex);
    const auto M = mixed_curvature(s, K, ex);
    const auto r4 = ricci4_tU(s, K, ex);
    const auto df = gradient(s.f, ex);
    ComplexField out(s.grid());
    for_each_index(out.size(), ex, [&](std::size_t p) {
        const double f = s.f[p];
        const Vec3& u = s.U[p];
        const CVec3 Z = fr.Z(p), Zb = Z.conjugate();
        const Vec3 dfp = dvec(df, p);
        const cplx Zf = cplx(Z.transpose() * dfp.cast<cplx>());
        const cplx Zl = Zf / f;
        const double Ulnf = u.dot(dfp) / f;
        const cplx TZZ = quad(T[p], Z, Z), TZZb = quad(T[p], Z, Zb), TZbZb = std::conj(TZZ);
        const cplx TUZ = cplx(u.cast<cplx>().transpose() * (T[p].cast<cplx>() * Z));
        const cplx gmuZ = cplx((s.g.g[p] * d.mu[p]).cast<cplx>().transpose() * Z);
        const cplx MZZ = quad(M[p], Z, Z);
        const cplx RicZZ = quad(c3.ricci[p], Z, Z);
        const double RicUU = u.dot(c3.ricci[p] * u);
        const cplx sg = d.sigma[p], rho = d.rho[p], tau = d.tau[p];
        const cplx rhs_sigma = (0.5 * TZZb + f * tau - 0.5 * f * (rho + std::conj(rho))) * sg -
                               0.5 * TZZ * (rho - 2.0 * Ulnf) + Zl * (0.5 * Zf - TUZ) - (0.5 * Zf + TUZ) * gmuZ +
                               MZZ - f * RicZZ;
        const cplx rhs_rho = -0.5 * (f * rho + TZZb) * rho - 0.5 * (f * std::conj(sg) + TZbZb) * sg +
                             Zl * std::conj(Zl) / f + 0.5 * TZZb * tau - r4[p] - f * RicUU;
        switch (q) {
            case TransportQuantity::Sigma: out[p] = rhs_sigma; break;
            case TransportQuantity::AbsSigmaSq: out[p] = 2.0 * (std::conj(sg) * rhs_sigma).real(); break;
            case TransportQuantity::Rho: out[p] = rhs_rho; break;
            // (rho - rhobar)/2i from the rho law; keeps the -f Re(rho) Im(rho) term
            case TransportQuantity::ImRho: out[p] = rhs_rho.imag(); break;
        }
    });
    return out;
}

TransportResult transport_check(const Trajectory& traj, const Lapse& lapse, TransportQuantity q,
                                const TransportOptions& opt, Exec ex) {
    const auto& S = traj.slices;
    const int N = static_cast<int>(S.size());
    if (N < 5) throw DomainError("transport_check: need at least 5 stored slices");
    const double D = S[1].t - S[0].t;
    for (int n = 1; n < N; ++n)
        if (std::abs(S[n].t - S[n - 1].t - D) > 1e-9 * std::max(1.0, std::abs(D)))
            throw DomainError("transport_check: stored slices are not uniformly spaced");
    const ChartGrid& grid = S[0].grid();

    std::vector<ComplexField> Q(N), R(N);
    Frame2 fr;
    for (int n = 0; n < N; ++n) {
        fr = n == 0 ? complementary_frame(S[n].g, S[n].U, Vec3(1, 0, 0), std::numeric_limits<double>::infinity(), ex)
                    : continue_frame(fr, S[n].g, S[n].U, ex);
        Q[n] = transport_quantity(diagnostics(S[n].g, S[n].U, fr, ex), q);
        R[n] = transport_rhs(S[n], fr, q, ex);
    }

    // velocity f U at (t, x): cubic Lagrange in time over stored slices, tricubic in space
    auto vel = [&](double t, const Vec3& x) -> std::optional<Vec3> {
        if (!grid.contains(x)) return std::nullopt;
        const double xi = (t - S[0].t) / D;
        const int b = std::clamp(static_cast<int>(std::floor(xi)) - 1, 0, N - 4);
        double w[4];
        detail::cubic_weights(xi, b, w);
        Vec3 u = Vec3::Zero();
        for (int m = 0; m < 4; ++m) u += w[m] * interpolate(S[b + m].U, x);
        return lapse.value(t, x) * u;
    };
    auto advance = [&](Vec3 x, double t0, double span) -> std::optional<Vec3> {
        const int ns = opt.substeps;
        const double h = span / ns;
        double t = t0;
        for (int i = 0; i < ns; ++i) {
            const auto k1 = vel(t, x);
            if (!k1) return std::nullopt;
            const auto k2 = vel(t + 0.5 * h, x + 0.5 * h * *k1);
            if (!k2) return std::nullopt;
            const auto k3 = vel(t + 0.5 * h, x + 0.5 * h * *k2);
            if (!k3) return std::nullopt;
            const auto k4 = vel(t + h, x + h * *k3);
            if (!k4) return std::nullopt;
            x += h / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
            t += h;
        }
        return x;
    };

    std::vector<std::size_t> pts;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto c = grid.ijk(p);
        if (grid.boundary_distance(p) < opt.margin) continue;
        if (opt.mask && !(*opt.mask)[p]) continue;
        if (c[0] % opt.sample_stride || c[1] % opt.sample_stride || c[2] % opt.sample_stride) continue;
        pts.push_back(p);
    }

    TransportResult res;
    res.points = pts.size();
    for (int n = 2; n + 2 < N; ++n) {
        std::vector<double> rmax(pts.size(), 0.0), qmax(pts.size(), 0.0);
        std::vector<char> lost(pts.size(), 0);
        for_each_index(pts.size(), ex, [&](std::size_t i) {
            const std::size_t p = pts[i];
            const Vec3 x0 = grid.point(p);
            const double t0 = S[n].t;
            cplx v[4];
            const int offs[4] = {-2, -1, 1, 2};
            std::optional<Vec3> xm1 = advance(x0, t0, -D), xp1 = advance(x0, t0, D);
            std::optional<Vec3> xm2 = xm1 ? advance(*xm1, t0 - D, -D) : std::nullopt;
            std::optional<Vec3> xp2 = xp1 ? advance(*xp1, t0 + D, D) : std::nullopt;
            const std::optional<Vec3>* xs[4] = {&xm2, &xm1, &xp1, &xp2};
            for (int k = 0; k < 4; ++k) {
                if (!*xs[k] || !grid.contains(**xs[k])) {
                    lost[i] = 1;
                    return;
                }
                v[k] = interpolate(Q[n + offs[k]], **xs[k]);
            }
            const cplx dq = (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * D);
            rmax[i] = std::abs(dq - R[n][p]);
            qmax[i] = std::abs(dq);
        });
        double r = 0, m = 0;
        std::size_t nl = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (lost[i]) { ++nl; continue; }
            r = std::max(r, rmax[i]);
            m = std::max(m, qmax[i]);
        }
        res.masked = std::max(res.masked, nl);
        res.t.push_back(S[n].t);
        res.residual.push_back(r);
        res.magnitude.push_back(m);
    }
    return res;
}

ComplexField quad_residual(const Slice& s, const TensorField& T, const Frame2& fr, Exec ex) {
    const ChartGrid& grid = s.grid();
    const auto df = gradient(s.f, ex);
    TensorField K(grid);
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        K[p] = sym(-sym2(s.g.g[p] * s.U[p], dvec(df, p)) + 2.0 * T[p]);
    });
    const auto R = curvature_R(s, K, nullptr, ex);
    const auto d = diagnostics(s.g, s.U, fr, ex);
    ComplexField out(grid);
    for_each_index(grid.size(), ex, [&](std::size_t p) {
        const CVec3 Z = fr.Z(p);
        const Vec3 dfp = dvec(df, p);
        const double f = s.f[p];
        const cplx Zl = cplx(Z.transpose() * dfp.cast<cplx>()) / f;
        const double Ulnf = s.U[p].dot(dfp) / f;
        out[p] = -0.5 * quad(T[p], Z, Z) * (d.rho[p] - 2.0 * Ulnf) + Zl * Zl / f + quad(R[p], Z, Z);
    });
    return out;
}

StationarityReport stationarity_report(const Slice& s, const Vec3& seed, const Region& r, Exec ex) {
    const ChartGrid& grid = s.grid();
    const auto gamma = christoffel3(s.g, ex);
    const auto c3 = curvature3(s.g, gamma, ex, false);
    const auto fr = complementary_frame(s.g, s.U, seed, std::numeric_limits<double>::infinity(), ex);
    const auto lnf = map_field<double>(s.f, [](double f, std::size_t) { return std::log(f); }, ex);
    const auto dl = gradient(lnf, ex);
    const auto H = hessian(gamma, lnf, ex);
    const auto mu = cov_deriv(gamma, s.U, s.U, ex);
    StationarityReport rep;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (!r.contains(grid, p)) continue;
        const Vec3 d = dvec(dl, p);
        const CVec3 Z = fr.Z(p);
        const cplx Zl = cplx(Z.transpose() * d.cast<cplx>());
        rep.grad_ln_f_minus_mu = std::max(rep.grad_ln_f_minus_mu, g_norm(s.g.g[p], s.g.ginv[p] * d - mu[p]));
        rep.U_f = std::max(rep.U_f, std::abs(s.f[p] * s.U[p].dot(d)));
        rep.ricci_ZZ = std::max(rep.ricci_ZZ, std::abs(quad(c3.ricci[p], Z, Z) - Zl * Zl));
        rep.hessian_ZZ = std::max(rep.hessian_ZZ, std::abs(quad(H[p], Z, Z) - 2.0 * Zl * Zl));
    }
    return rep;
}

}  // namespace sfr
