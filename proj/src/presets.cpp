#include "sfr/presets.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sfr/field_io.hpp"

namespace sfr {

namespace {

constexpr double kPi = std::numbers::pi;

struct PresetInfo {
    const char* name;
    const char* description;
};

constexpr PresetInfo kPresets[] = {
    {"flat-d1", "flat box, U = d1, f = 1: stationary"},
    {"case1-radial", "Euclidean metric in spherical coordinates, U = d_r, T = 0, f = 1: stationary"},
    {"case1-circle", "circle field on a flat wedge with f = 1/rho and T = theta.df (Case-1 datum)"},
    {"hopf-s3", "Hopf field on the round 3-sphere under the constant-curvature flow: stationary"},
    {"circle", "circle field on a flat slab, fibres follow the closed-form phi_t"},
    {"ex-flat", "incidence example with c = 1: U follows the closed-form direction field, fibres are level sets of psi_t"},
    {"random-sfr", "seeded random non-conformal unit field on flat space under the SFR flow"},
    {"radial-r2", "radial metric b = r^2 under the integrable-complement flow"},
};

// uniform in [a, b) from the raw generator output, identical on every platform
double draw(std::mt19937_64& rng, double a, double b) {
    return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

ChartGrid grid_for(const Scenario& sc, const std::array<Axis, 3>& def) {
    std::array<Axis, 3> ax = sc.axes ? *sc.axes : def;
    for (auto& a : ax) a = refine_axis(a, sc.refine);
    return make_grid(ax);
}

VectorField unit_normalized(const MetricField& m, VectorField U) {
    for (std::size_t p = 0; p < U.size(); ++p) {
        const double n2 = U[p].dot(m.g[p] * U[p]);
        if (!(n2 > 0)) throw DegeneracyError("initial U vanishes at grid point " + std::to_string(p));
        U[p] /= std::sqrt(n2);
    }
    return U;
}

MetricField spherical_metric(const ChartGrid& g, const std::function<double(double)>& b, Exec ex) {
    return make_metric(sample<Mat3>(g, [&](const Vec3& x) {
        const double bb = b(x[0]) * b(x[0]), sn = std::sin(x[1]);
        return Mat3(Eigen::Vector3d(1, bb, bb * sn * sn).asDiagonal());
    }, ex), ex);
}

std::function<VectorField(double)> constant_field(const VectorField& U) {
    return [U](double) { return U; };
}

void set_variant(const Scenario& sc, FlowSpec& f, FlowVariant def) {
    if (!sc.flow_variant_set) f.variant = def;
}

PreparedRun prepare_preset(const Scenario& sc, Exec ex) {
    PreparedRun r;
    r.flow = sc.flow;
    r.description = preset_description(sc.preset);
    const std::string& name = sc.preset;
    const double t0 = sc.t0;

    if (name == "flat-d1") {
        const auto g = grid_for(sc, {Axis{0, 1, 17}, Axis{0, 1, 17}, Axis{0, 1, 17}});
        set_variant(sc, r.flow, FlowVariant::ConstCurvCFGR);
        r.initial = make_slice(t0, flat_metric(g), VectorField(g, Vec3(1, 0, 0)), r.flow.lapse);
        r.stationary = true;
    } else if (name == "case1-radial") {
        const auto g = grid_for(sc, {Axis{1, 2, 17}, Axis{kPi / 4, 3 * kPi / 4, 17}, Axis{0, 2 * kPi, 8, true}});
        set_variant(sc, r.flow, FlowVariant::Custom);
        r.flow.custom_T = [](const Slice& s) { return TensorField(s.grid(), Mat3::Zero()); };
        r.initial = make_slice(t0, spherical_metric(g, [](double x) { return x; }, ex), VectorField(g, Vec3(1, 0, 0)),
                               r.flow.lapse);
        r.stationary = true;
    } else if (name == "case1-circle") {
        const auto g = grid_for(sc, {Axis{0.6, 1.4, 25}, Axis{-0.4, 0.4, 25}, Axis{0, 1, 6, true}});
        set_variant(sc, r.flow, FlowVariant::Custom);
        r.flow.lapse.fn = [](double, const Vec3& x) { return 1.0 / std::hypot(x[0], x[1]); };
        r.flow.lapse.dt_fn = [](double, const Vec3&) { return 0.0; };
        // T = sym(theta (x) df): grad ln f = nabla_U U and U(f) = 0 make the datum stationary
        r.flow.custom_T = [](const Slice& s) {
            const auto df = gradient(s.f);
            TensorField T(s.grid());
            for (std::size_t p = 0; p < T.size(); ++p) {
                const Vec3 th = s.g.g[p] * s.U[p];
                const Vec3 d(df[0][p], df[1][p], df[2][p]);
                T[p] = 0.5 * (th * d.transpose() + d * th.transpose());
            }
            return T;
        };
        r.initial = make_slice(t0, flat_metric(g), sample<Vec3>(g, circle_direction, ex), r.flow.lapse);
        r.exact_U = constant_field(r.initial.U);
    } else if (name == "hopf-s3") {
        const auto g = grid_for(sc, {Axis{0.2, kPi / 2 - 0.2, 17}, Axis{0, 2 * kPi, 8, true}, Axis{0, 2 * kPi, 8, true}});
        set_variant(sc, r.flow, FlowVariant::ConstCurvCFGR);
        auto m = make_metric(sample<Mat3>(g, [](const Vec3& x) {
            const double c = std::cos(x[0]), sn = std::sin(x[0]);
            return Mat3(Eigen::Vector3d(1, c * c, sn * sn).asDiagonal());
        }, ex), ex);
        r.initial = make_slice(t0, std::move(m), VectorField(g, Vec3(0, -1, 1)), r.flow.lapse);
        r.stationary = true;
    } else if (name == "circle") {
        const auto g = grid_for(sc, {Axis{-0.5, 0.5, 33}, Axis{0.5, 1.5, 33}, Axis{0, 1, 6, true}});
        set_variant(sc, r.flow, FlowVariant::ConstCurvCFGR);
        if (!r.flow.lapse.is_unit()) throw SchemaError("preset circle needs f = 1");
        r.initial = make_slice(t0, flat_metric(g), sample<Vec3>(g, circle_direction, ex), r.flow.lapse);
        r.fibre_gradient = [t0](double t, const Vec3& x) { return circle_phi_gradient(t - t0, x); };
        r.fibre_domain = [t0](double t, const Vec3& x) {
            return x[0] * x[0] + x[1] * x[1] > 4 * (t - t0) * (t - t0);
        };
    } else if (name == "ex-flat") {
        const auto g = grid_for(sc, {Axis{0.5, 1.5, 17}, Axis{0.5, 1.5, 17}, Axis{0.5, 1.5, 17}});
        set_variant(sc, r.flow, FlowVariant::ConstCurvCFGR);
        const double ts = t0 == 0.0 ? 1.5 : t0;  // psi_t needs t != 0
        auto Ut = [g, ex](double t) {
            return sample<Vec3>(g, [t](const Vec3& x) {
                return twistor::incidence_example_flat(1.0, Vec4(t, x[0], x[1], x[2])).U_conj;
            }, ex);
        };
        r.initial = make_slice(ts, flat_metric(g), Ut(ts), r.flow.lapse);
        r.exact_U = Ut;
        // psi_t = P / (t^2 qbar), P = |x|^2 - 2 x1 (1 + t) + (1 + t)^2
        r.fibre_gradient = [](double t, const Vec3& x) {
            const cplx qb(x[1], -x[2]);
            const double P = x.squaredNorm() - 2 * x[0] * (1 + t) + (1 + t) * (1 + t);
            const cplx a = 1.0 / (t * t * qb);
            CVec3 d;
            d[0] = a * (2 * x[0] - 2 * (1 + t));
            d[1] = a * (2 * x[1]) - P / (t * t * qb * qb);
            d[2] = a * (2 * x[2]) - P * cplx(0, -1) / (t * t * qb * qb);
            return d;
        };
        r.fibre_domain = [](double t, const Vec3&) { return t != 0.0; };
    } else if (name == "random-sfr") {
        const auto g = grid_for(sc, {Axis{0, 1, 17}, Axis{0, 1, 17}, Axis{0, 1, 17}});
        set_variant(sc, r.flow, FlowVariant::SFR);
        std::mt19937_64 rng(sc.seed);
        std::array<std::array<double, 5>, 9> modes{};  // 3 modes per component: A, kx, ky, kz, phase
        for (auto& md : modes) md = {draw(rng, -1, 1), draw(rng, -2, 2), draw(rng, -2, 2), draw(rng, -2, 2), draw(rng, 0, 2 * kPi)};
        r.flow.lapse.fn = [](double t, const Vec3& x) { return 1.0 + 0.2 * std::sin(x[0] + 2 * x[1] - x[2] + t); };
        r.flow.lapse.dt_fn = [](double t, const Vec3& x) { return 0.2 * std::cos(x[0] + 2 * x[1] - x[2] + t); };
        const auto m = flat_metric(g);
        auto U = sample<Vec3>(g, [&](const Vec3& x) {
            Vec3 u(0.6, 0.6, 0.6);
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < 3; ++k) {
                    const auto& md = modes[3 * c + k];
                    u[c] += 0.4 * md[0] * std::sin(md[1] * x[0] + md[2] * x[1] + md[3] * x[2] + md[4]);
                }
            return u;
        }, Exec::Serial);
        r.initial = make_slice(t0, m, unit_normalized(m, std::move(U)), r.flow.lapse);
    } else if (name == "radial-r2") {
        const auto g = grid_for(sc, {Axis{1, 2, 17}, Axis{kPi / 4, 3 * kPi / 4, 17}, Axis{0, 2 * kPi, 8, true}});
        set_variant(sc, r.flow, FlowVariant::IntegrableCFGR);
        r.initial = make_slice(t0, spherical_metric(g, [](double x) { return x * x; }, ex), VectorField(g, Vec3(1, 0, 0)),
                               r.flow.lapse);
    } else {
        throw SchemaError("unknown preset '" + name + "'");
    }
    if (r.stationary) r.exact_U = constant_field(r.initial.U);
    return r;
}

PreparedRun prepare_kerr(const Scenario& sc, Exec ex) {
    PreparedRun r;
    r.flow = sc.flow;
    r.description = "Kerr-generated direction field, F = " + sc.kerr.describe();
    const auto g = grid_for(sc, *sc.axes);
    if (!r.flow.lapse.is_unit()) throw SchemaError("kerr scenarios need f = 1");
    const auto kg = twistor::kerr_grid(sc.kerr, g, sc.t0, sc.kerr_seed);
    if (!kg.failures.empty() || !kg.jumps.empty())
        throw DegeneracyError("kerr: root continuation failed at " + std::to_string(kg.failures.size()) +
                              " points with " + std::to_string(kg.jumps.size()) + " branch jumps at t0");
    r.initial = make_slice(sc.t0, flat_metric(g), twistor::direction_field(kg.mu, ex), r.flow.lapse);
    const auto F = sc.kerr;
    const cplx seed = sc.kerr_seed;
    r.exact_U = [F, g, seed, ex](double t) {
        const auto k = twistor::kerr_grid(F, g, t, seed);
        if (!k.failures.empty() || !k.jumps.empty()) throw DegeneracyError("kerr: root continuation failed at t = " + format_double(t));
        return twistor::direction_field(k.mu, ex);
    };
    return r;
}

PreparedRun prepare_fields(const Scenario& sc) {
    if (sc.refine != 0) throw SchemaError("fields scenarios have a fixed grid and cannot be refined");
    const Snapshot snap = read_snapshot(sc.fields);
    PreparedRun r;
    r.flow = sc.flow;
    r.description = "fields read from " + sc.fields;
    try {
        auto m = make_metric(snap.sym("g"));
        r.initial = make_slice(snap.t, m, unit_normalized(m, snap.vector("U")), r.flow.lapse);
    } catch (const DomainError& e) {
        throw SchemaError(std::string("fields: ") + e.what());
    }
    return r;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : kPresets) out.emplace_back(p.name);
    return out;
}

std::string preset_description(const std::string& name) {
    for (const auto& p : kPresets)
        if (name == p.name) return p.description;
    throw SchemaError("unknown preset '" + name + "'");
}

Axis refine_axis(const Axis& a, int levels) {
    Axis r = a;
    const int m = 1 << levels;
    r.n = a.periodic ? a.n * m : (a.n - 1) * m + 1;
    return r;
}

PreparedRun prepare_run(const Scenario& sc, Exec ex) {
    switch (sc.kind) {
        case InitialKind::Preset: return prepare_preset(sc, ex);
        case InitialKind::Kerr: return prepare_kerr(sc, ex);
        case InitialKind::Fields: return prepare_fields(sc);
        case InitialKind::Reduced: break;
    }
    throw SchemaError("prepare_run: reduced scenarios have no 3D initial slice");
}

Vec3 circle_direction(const Vec3& x) {
    const double r = std::hypot(x[0], x[1]);
    if (!(r > 0)) throw DomainError("circle field: on the axis");
    return {-x[1] / r, x[0] / r, 0};
}

cplx circle_phi(double t, const Vec3& x) {
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] - t * t);
    return cplx(0, x[2]) + r - t * std::arg(cplx(r, -t) / cplx(x[0], -x[1]));
}

CVec3 circle_phi_gradient(double t, const Vec3& x) {
    const double rho2 = x[0] * x[0] + x[1] * x[1];
    const double r = std::sqrt(rho2 - t * t);
    // d arg((r - i t)/(x1 - i x2)) = t dr / rho^2 - (x2 dx1 - x1 dx2) / rho^2
    const double a1 = t * x[0] / (r * rho2) - x[1] / rho2;
    const double a2 = t * x[1] / (r * rho2) + x[0] / rho2;
    return CVec3(x[0] / r - t * a1, x[1] / r - t * a2, cplx(0, 1));
}

}  // namespace sfr
