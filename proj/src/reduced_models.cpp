#include "sfr/reduced_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sfr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEndTol = 1e-12;

using Vec = std::vector<double>;

Vec d1(const Vec& f, const Axis& ax) {
    const int n = ax.n;
    Vec out(n);
    for (int p = 0; p < n; ++p) {
        const auto st = detail::derivative_stencil(p, n, false, ax.h());
        double s = 0;
        for (int m = 0; m < 5; ++m) s += st.w[m] * f[p + st.off[m]];
        out[p] = s;
    }
    return out;
}

void axpy_into(Vec& y, const Vec& x, double a, const Vec& k) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + a * k[i];
}

void rk4_combine(Vec& x, double h, const Vec& k1, const Vec& k2, const Vec& k3, const Vec& k4) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

int step_count(double dt, double t_end) {
    if (!(dt > 0) || !(t_end > 0)) throw SchemaError("reduced evolution: dt and t_end must be > 0");
    return std::max(1, static_cast<int>(std::ceil(t_end / dt - 1e-9)));
}

int node_of(const Axis& ax, double x) {
    const double xi = (x - ax.min) / ax.h();
    const int i = static_cast<int>(std::lround(xi));
    if (i < 0 || i >= ax.n || std::abs(xi - i) > 1e-9) {
        std::ostringstream os;
        os << "radial: r0 = " << x << " is not a grid node";
        throw DomainError(os.str());
    }
    return i;
}

}  // namespace

Axis line_axis(double min, double max, int n) {
    if (n < 5 || !(min < max)) throw SchemaError("line axis needs n >= 5 and min < max");
    return Axis{min, max, n, false, ""};
}

// ---------------- S^3 ----------------

Axis s3_axis(double eps, int n) {
    if (!(eps >= 0) || !(eps < kPi / 4)) throw SchemaError("s3: eps must lie in [0, pi/4)");
    return line_axis(eps, kPi / 2 - eps, n);
}

S3State s3_initial(int k, int l, const Axis& s) {
    if (k == 0 || l == 0) throw DomainError("s3: k and l must be nonzero");
    S3State st{s, Vec(s.n, 0.0), Vec(s.n), Vec(s.n), k, l};
    for (int i = 0; i < s.n; ++i) {
        const double x = s.coord(i), sn = std::sin(x), c = std::cos(x);
        const double q = std::sqrt(double(k) * k * sn * sn + double(l) * l * c * c);
        st.v[i] = -l / q;
        st.w[i] = k / q;
    }
    return st;
}

S3Rates s3_rhs(const S3State& st) {
    const int n = st.s.n;
    const Vec us = d1(st.u, st.s), vs = d1(st.v, st.s), ws = d1(st.w, st.s);
    S3Rates r{Vec(n), Vec(n), Vec(n)};
    for (int i = 0; i < n; ++i) {
        const double x = st.s.coord(i), sn = std::sin(x), c = std::cos(x);
        const double u = st.u[i], v = st.v[i], w = st.w[i];
        r.du[i] = -(v * v - w * w) * sn * c - u * us[i];
        const bool at0 = std::abs(x) < kEndTol, at1 = std::abs(x - kPi / 2) < kEndTol;
        if ((at0 || at1) && std::abs(u) > kEndTol) {
            std::ostringstream os;
            os << "s3: u = " << u << " at the chart endpoint s = " << x;
            throw DegeneracyError(os.str());
        }
        // u tan s and u cot s, with their limits at the endpoints
        const double u_tan = at1 ? -us[i] : u * sn / c;
        const double u_cot = at0 ? us[i] : u * c / sn;
        r.dv[i] = -u * vs[i] + 2 * v * u_tan;
        r.dw[i] = -u * ws[i] - 2 * w * u_cot;
    }
    return r;
}

double s3_norm_defect(const S3State& st) {
    double e = 0;
    for (int i = 0; i < st.s.n; ++i) {
        const double x = st.s.coord(i), sn = std::sin(x), c = std::cos(x);
        const double q = st.u[i] * st.u[i] + st.v[i] * st.v[i] * c * c + st.w[i] * st.w[i] * sn * sn;
        e = std::max(e, std::abs(q - 1));
    }
    return e;
}

S3Trajectory s3_evolve(const S3State& st0, double dt, double t_end, int store_every) {
    const int steps = step_count(dt, t_end);
    const double h = t_end / steps;
    store_every = std::max(1, store_every);
    S3Trajectory tr;
    S3State x = st0, y = st0;
    auto stage = [&](const S3Rates& k, double a) {
        axpy_into(y.u, x.u, a, k.du);
        axpy_into(y.v, x.v, a, k.dv);
        axpy_into(y.w, x.w, a, k.dw);
        return s3_rhs(y);
    };
    for (int step = 0;; ++step) {
        if (step % store_every == 0 || step == steps) {
            tr.t.push_back(step * h);
            tr.states.push_back(x);
            tr.norm_defect.push_back(s3_norm_defect(x));
        }
        if (step == steps) break;
        const S3Rates k1 = s3_rhs(x);
        const S3Rates k2 = stage(k1, 0.5 * h);
        const S3Rates k3 = stage(k2, 0.5 * h);
        const S3Rates k4 = stage(k3, h);
        rk4_combine(x.u, h, k1.du, k2.du, k3.du, k4.du);
        rk4_combine(x.v, h, k1.dv, k2.dv, k3.dv, k4.dv);
        rk4_combine(x.w, h, k1.dw, k2.dw, k3.dw, k4.dw);
    }
    return tr;
}

// ---------------- radial ----------------

RadialState radial_state(const Axis& r, const std::function<double(double)>& b) {
    RadialState st{r, Vec(r.n, 1.0), Vec(r.n), true};
    for (int i = 0; i < r.n; ++i) st.b[i] = b(r.coord(i));
    return st;
}

std::vector<double> radial_rhs(const RadialState& st, const RadialBoundary& bc) {
    if (!st.unit_gauge) throw DomainError("radial: only the gauge a = 1 is supported");
    const int n = st.r.n;
    const double h = st.r.h();
    double bmax = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(st.a[i] - 1) > 1e-12) throw DomainError("radial: gauge flag set but a != 1");
        bmax = std::max(bmax, std::abs(st.b[i]));
    }
    for (int i = 0; i < n; ++i)
        if (!(st.b[i] > 1e-10 * std::max(1.0, bmax))) {
            std::ostringstream os;
            os << "radial: b = " << st.b[i] << " at r = " << st.r.coord(i);
            throw DegeneracyError(os.str());
        }

    const Vec bp = d1(st.b, st.r);
    Vec bbp(n);
    for (int i = 0; i < n; ++i) bbp[i] = st.b[i] * bp[i];
    const Vec bbpp = d1(bbp, st.r);
    Vec F(n);
    for (int i = 0; i < n; ++i) F[i] = (1 - bbpp[i]) / (st.b[i] * st.b[i]);

    // integral over [r_i, r_{i+1}] of the cubic through four neighbouring nodes
    auto cell = [&](int i) {
        if (i == 0) return h * (9 * F[0] + 19 * F[1] - 5 * F[2] + F[3]) / 24;
        if (i == n - 2) return h * (F[n - 4] - 5 * F[n - 3] + 19 * F[n - 2] + 9 * F[n - 1]) / 24;
        return h * (-F[i - 1] + 13 * F[i] + 13 * F[i + 1] - F[i + 2]) / 24;
    };
    const int i0 = bc.r0 ? node_of(st.r, *bc.r0) : 0;
    Vec I(n, 0.0);
    for (int i = i0; i + 1 < n; ++i) I[i + 1] = I[i] + cell(i);
    for (int i = i0; i > 0; --i) I[i - 1] = I[i] - cell(i - 1);

    Vec m(n);
    const double c0 = bc.m0 / st.b[i0];
    for (int i = 0; i < n; ++i) m[i] = st.b[i] * (c0 + I[i]);
    return m;
}

RadialTrajectory radial_evolve(const RadialState& st0, const RadialBoundary& bc, double dt, double t_end,
                               int store_every) {
    const int steps = step_count(dt, t_end);
    const double h = t_end / steps;
    store_every = std::max(1, store_every);
    RadialTrajectory tr;
    RadialState x = st0, y = st0;
    for (int step = 0;; ++step) {
        if (step % store_every == 0 || step == steps) {
            tr.t.push_back(step * h);
            tr.states.push_back(x);
        }
        if (step == steps) break;
        const Vec k1 = radial_rhs(x, bc);
        axpy_into(y.b, x.b, 0.5 * h, k1);
        const Vec k2 = radial_rhs(y, bc);
        axpy_into(y.b, x.b, 0.5 * h, k2);
        const Vec k3 = radial_rhs(y, bc);
        axpy_into(y.b, x.b, h, k3);
        const Vec k4 = radial_rhs(y, bc);
        rk4_combine(x.b, h, k1, k2, k3, k4);
    }
    return tr;
}

// ---------------- cross-check ----------------

std::string to_string(ReducedModel m) { return m == ReducedModel::S3 ? "s3" : "radial"; }

ReducedModel parse_reduced_model(const std::string& s) {
    if (s == "s3") return ReducedModel::S3;
    if (s == "radial") return ReducedModel::Radial;
    throw SchemaError("unknown reduced model '" + s + "' (expected s3 or radial)");
}

namespace {

FlowSpec full_spec(FlowVariant v, double dt, double t_end) {
    FlowSpec fs;
    fs.variant = v;
    fs.dt = dt;
    fs.t_end = t_end;
    fs.store_every = 1 << 30;
    fs.monitor_every = 1 << 30;
    fs.halt_on_breach = false;
    return fs;
}

CrosscheckReport s3_crosscheck(const CrosscheckSpec& spec, int n, Exec ex) {
    const Axis s = s3_axis(spec.eps, n);
    const auto grid = make_grid({s, Axis{0, 2 * kPi, 5, true}, Axis{0, 2 * kPi, 5, true}});
    const S3State st0 = s3_initial(spec.k, spec.l, s);
    const double h = spec.courant * s.h();
    const int steps = step_count(h, spec.t_end);
    const double dt = spec.t_end / steps;

    auto m = make_metric(sample<Mat3>(grid, [](const Vec3& x) {
        const double c = std::cos(x[0]), sn = std::sin(x[0]);
        return Mat3(Eigen::Vector3d(1, c * c, sn * sn).asDiagonal());
    }, ex), ex);
    VectorField U(grid);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const int i = grid.ijk(p)[0];
        U[p] = Vec3(st0.u[i], st0.v[i], st0.w[i]);
    }
    FlowSpec fs = full_spec(FlowVariant::Custom, dt, spec.t_end);
    fs.custom_T = [](const Slice& sl) { return TensorField(sl.grid(), Mat3::Zero()); };
    const auto traj = evolve(make_slice(0.0, std::move(m), U, Lapse{}), fs, ex);
    const auto red = s3_evolve(st0, dt, spec.t_end);

    CrosscheckReport rep{ReducedModel::S3, n, dt, spec.t_end};
    rep.halted = traj.halted;
    rep.halt_reason = traj.halt_reason;
    const S3State& r1 = red.states.back();
    const VectorField& U1 = traj.slices.back().U;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const int i = grid.ijk(p)[0];
        const Vec3 a(r1.u[i], r1.v[i], r1.w[i]), a0(st0.u[i], st0.v[i], st0.w[i]);
        rep.full_change = std::max(rep.full_change, (U1[p] - U[p]).cwiseAbs().maxCoeff());
        rep.reduced_change = std::max(rep.reduced_change, (a - a0).cwiseAbs().maxCoeff());
        if (i >= 2 && i <= n - 3) rep.discrepancy = std::max(rep.discrepancy, (U1[p] - a).cwiseAbs().maxCoeff());
    }
    return rep;
}

CrosscheckReport radial_crosscheck(const CrosscheckSpec& spec, int n, Exec ex) {
    const Axis r = line_axis(spec.r_min, spec.r_max, n);
    const auto grid = make_grid({r, Axis{kPi / 6, 5 * kPi / 6, n}, Axis{0, 2 * kPi, 8, true}});
    const RadialState st0 = radial_state(r, spec.b);
    const double h = spec.courant * r.h();
    const int steps = step_count(h, spec.t_end);
    const double dt = spec.t_end / steps;

    auto m = make_metric(sample<Mat3>(grid, [&](const Vec3& x) {
        const double bb = spec.b(x[0]) * spec.b(x[0]), sn = std::sin(x[1]);
        return Mat3(Eigen::Vector3d(1, bb, bb * sn * sn).asDiagonal());
    }, ex), ex);
    const auto traj = evolve(make_slice(0.0, std::move(m), VectorField(grid, Vec3(1, 0, 0)), Lapse{}),
                             full_spec(FlowVariant::IntegrableCFGR, dt, spec.t_end), ex);
    // the full solver starts K = 0 on the inflow face r = r_min
    const auto red = radial_evolve(st0, RadialBoundary{}, dt, spec.t_end);

    CrosscheckReport rep{ReducedModel::Radial, n, dt, spec.t_end};
    rep.halted = traj.halted;
    rep.halt_reason = traj.halt_reason;
    const RadialState& r1 = red.states.back();
    const MetricField& g1 = traj.slices.back().g;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        // the s faces cut the sphere artificially; the full solution is compared on a central band
        const int i = grid.ijk(p)[0];
        if (std::abs(grid.point(p)[1] - kPi / 2) > kPi / 6 + 1e-12) continue;
        const double bf = std::sqrt(g1.g[p](1, 1));
        rep.full_change = std::max(rep.full_change, std::abs(bf - st0.b[i]));
        rep.reduced_change = std::max(rep.reduced_change, std::abs(r1.b[i] - st0.b[i]));
        if (i >= 2 && i <= n - 3) rep.discrepancy = std::max(rep.discrepancy, std::abs(bf - r1.b[i]));
    }
    return rep;
}

}  // namespace

CrosscheckReport reduced_vs_full_crosscheck(const CrosscheckSpec& spec, int resolution, Exec ex) {
    if (!(spec.courant > 0) || !(spec.t_end > 0)) throw SchemaError("crosscheck: courant and t_end must be > 0");
    return spec.model == ReducedModel::S3 ? s3_crosscheck(spec, resolution, ex) : radial_crosscheck(spec, resolution, ex);
}

}  // namespace sfr
