#include "sfr/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <optional>

#include "sfr/field_io.hpp"
#include "sfr/semiconformal.hpp"
#include "sfr/version.hpp"

namespace sfr {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;

json num(double x) { return std::isfinite(x) ? json(x) : json("off"); }

std::string header_line(const std::string& scenario) {
    return "# schema_version=" + std::to_string(kSchemaVersion) + " build=" + build_string() + " scenario=" + scenario;
}

std::string slice_name(const char* stem, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu", stem, k);
    return buf;
}

std::string prepare_dir(const std::string& out_dir, const std::string& name) {
    const fs::path p = fs::path(out_dir) / name;
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DomainError("cannot create output directory " + p.string() + ": " + ec.message());
    return p.string();
}

void write_monitors(const std::string& path, const std::string& scenario, const std::vector<MonitorRecord>& ms) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    os << header_line(scenario) << "\n";
    os << "step,t,unit,ray,geodesic,sfr_identity,shear4,max_sigma,max_im_rho,min_abs_nu\n";
    for (const auto& m : ms)
        os << m.step << ',' << format_double(m.t) << ',' << format_double(m.unit) << ',' << format_double(m.ray) << ','
           << format_double(m.geodesic) << ',' << format_double(m.sfr_identity) << ',' << format_double(m.shear4)
           << ',' << format_double(m.max_sigma) << ',' << format_double(m.max_im_rho) << ','
           << format_double(m.min_abs_nu) << '\n';
}

// coordinate column followed by named columns
void write_columns(const std::string& path, const std::string& scenario, double t, const std::vector<std::string>& names,
                   const std::vector<const std::vector<double>*>& cols) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    os << header_line(scenario) << " t=" << format_double(t) << "\n";
    for (std::size_t c = 0; c < names.size(); ++c) os << (c ? "," : "") << names[c];
    os << "\n";
    for (std::size_t i = 0; i < cols[0]->size(); ++i) {
        for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << format_double((*cols[c])[i]);
        os << "\n";
    }
}

FoliationDiagnostics slice_diagnostics(const Slice& s, const Vec3& seed, Exec ex) {
    const Frame2 fr = complementary_frame(s.g, s.U, seed, std::numeric_limits<double>::infinity(), ex);
    return diagnostics(s.g, s.U, fr, ex);
}

double max_abs_diff(const VectorField& a, const VectorField& b, const Region& r, const std::vector<char>& mask) {
    double e = 0;
    for (std::size_t p = 0; p < a.size(); ++p)
        if (r.contains(a.grid, p) && (mask.empty() || mask[p])) e = std::max(e, (a[p] - b[p]).cwiseAbs().maxCoeff());
    return e;
}

double max_abs_diff(const TensorField& a, const TensorField& b) {
    double e = 0;
    for (std::size_t p = 0; p < a.size(); ++p) e = std::max(e, (a[p] - b[p]).cwiseAbs().maxCoeff());
    return e;
}

// max |d phi(U)| / |d phi| over the fibre domain
double fibre_residual(const PreparedRun& pr, const Slice& s, int margin) {
    const ChartGrid& g = s.grid();
    double e = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Vec3 x = g.point(p);
        if (g.boundary_distance(p) < margin || (pr.fibre_domain && !pr.fibre_domain(s.t, x))) continue;
        const CVec3 d = pr.fibre_gradient(s.t, x);
        e = std::max(e, std::abs(d.dot(s.U[p].cast<cplx>())) / d.norm());
    }
    return e;
}

void monitor_checks(RunReport& rep, const Trajectory& traj, const FlowSpec& spec) {
    auto worst = [&](auto get) {
        double m = 0;
        for (const auto& r : traj.monitors) m = std::max(m, get(r));
        return m;
    };
    auto add = [&](const char* name, double v, double tol) {
        if (std::isfinite(tol)) rep.checks.push_back(make_check(name, v, tol, "flow monitor"));
    };
    add("monitor_unit", worst([](const MonitorRecord& r) { return r.unit; }), spec.tol.unit);
    add("monitor_ray", worst([](const MonitorRecord& r) { return r.ray; }), spec.tol.ray);
    add("monitor_geodesic", worst([](const MonitorRecord& r) { return r.geodesic; }), spec.tol.geodesic);
    if (spec.variant == FlowVariant::SFR)
        add("monitor_sfr_identity", worst([](const MonitorRecord& r) { return r.sfr_identity; }), spec.tol.sfr_identity);
    if (spec.variant == FlowVariant::ConstCurvCFGR || spec.variant == FlowVariant::IntegrableCFGR) {
        add("monitor_sigma", worst([](const MonitorRecord& r) { return r.max_sigma; }), spec.tol.sigma);
        add("monitor_im_rho", worst([](const MonitorRecord& r) { return r.max_im_rho; }), spec.tol.im_rho);
    }
    if (spec.variant == FlowVariant::IntegrableCFGR && !traj.monitors.empty()) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& r : traj.monitors) lo = std::min(lo, r.min_abs_nu);
        const double nu0 = traj.monitors.front().min_abs_nu;
        rep.checks.push_back(make_check("monitor_nu_ratio", nu0 > 0 ? lo / nu0 : 0.0, spec.tol.nu_ratio,
                                        "min |nu| relative to its initial value", true));
    }
}

// ---------------- 3D runs ----------------

RunReport run_3d(const Scenario& sc, const std::string& dir, Exec ex) {
    RunReport rep;
    const PreparedRun pr = prepare_run(sc, ex);
    rep.description = pr.description;
    if (sc.diag.stationarity) {
        const auto st = stationarity_report(pr.initial, pr.flow.frame_seed, Region{sc.diag.margin}, ex);
        rep.values.push_back({"stationarity_grad_ln_f_minus_mu", st.grad_ln_f_minus_mu});
        rep.values.push_back({"stationarity_U_f", st.U_f});
        rep.values.push_back({"stationarity_ricci_ZZ", st.ricci_ZZ});
        rep.values.push_back({"stationarity_hessian_ZZ", st.hessian_ZZ});
    }

    const Trajectory traj = evolve(pr.initial, pr.flow, ex);
    rep.halted = traj.halted;
    rep.halt_reason = traj.halt_reason;

    const std::string mon = (fs::path(dir) / "monitors.csv").string();
    write_monitors(mon, sc.name, traj.monitors);
    rep.files.push_back(mon);

    monitor_checks(rep, traj, pr.flow);
    if (traj.halted) {
        bool breached = false;
        for (const auto& c : rep.checks) breached |= !c.pass;
        rep.degenerate = !breached;
        rep.checks.push_back(make_check("flow_completed", 1, 0, traj.halt_reason));
    }
    if (traj.slices.empty()) return rep;

    const Region region{sc.diag.margin};
    const Slice& first = traj.slices.front();
    const Slice& last = traj.slices.back();
    rep.values.push_back({"t_final", last.t});
    if (pr.stationary) {
        double du = 0, dg = 0;
        for (const auto& s : traj.slices) {
            du = std::max(du, max_abs_diff(s.U, first.U, Region{}, {}));
            dg = std::max(dg, max_abs_diff(s.g.g, first.g.g));
        }
        rep.checks.push_back(make_check("stationary_drift", std::max(du, dg), sc.checks.stationary,
                                        "max |U_t - U_0|, |g_t - g_0| over stored slices"));
    } else if (pr.exact_U) {
        double e = 0;
        for (const auto& s : traj.slices) e = std::max(e, max_abs_diff(s.U, pr.exact_U(s.t), region, pr.mask));
        rep.checks.push_back(make_check("closed_form_U", e, sc.checks.closed_form, "max |U_t - U_exact(t)|"));
    }
    if (pr.fibre_gradient) {
        double e = 0;
        for (const auto& s : traj.slices) e = std::max(e, fibre_residual(pr, s, sc.diag.margin));
        rep.checks.push_back(make_check("fibre_level_sets", e, sc.checks.level_set, "max |d phi_t(U_t)| / |d phi_t|"));
    }

    double sigma0 = 0, sigma1 = 0;
    for (std::size_t k = 0; k < traj.slices.size(); ++k) {
        const Slice& s = traj.slices[k];
        std::optional<FoliationDiagnostics> d;
        if (sc.diag.foliation) {
            d = slice_diagnostics(s, pr.flow.frame_seed, ex);
            const double sg = summarize(*d, s.g, region).max_sigma;
            if (k == 0) sigma0 = sg;
            sigma1 = sg;
        }
        if (!sc.diag.snapshots) continue;
        Snapshot snap;
        snap.grid = s.grid();
        snap.t = s.t;
        snap.kind = "state";
        snap.meta = {{"build", build_string()}, {"scenario", sc.name}};
        snap.add_sym("g", s.g.g);
        snap.add("U", s.U);
        snap.add("f", s.f);
        if (d) {
            snap.add("sigma", d->sigma);
            snap.add("rho", d->rho);
            snap.add("nu", d->nu);
        }
        const std::string prefix = (fs::path(dir) / slice_name("slice", k)).string();
        write_snapshot(prefix, snap);
        rep.files.push_back(prefix + ".csv");
    }
    if (sc.diag.foliation) {
        rep.values.push_back({"sigma_initial", sigma0});
        rep.values.push_back({"sigma_final", sigma1});
        if (std::isfinite(sc.checks.sigma))
            rep.checks.push_back(make_check("sigma_growth", sigma1 - sigma0, sc.checks.sigma,
                                            "max |sigma| on the last slice minus its initial value"));
    }
    return rep;
}

// ---------------- reduced runs ----------------

std::function<double(double)> b_profile(const ReducedScenario& r) {
    if (r.b == "r") return [](double x) { return x; };
    if (r.b == "r+c") return [c = r.c](double x) { return x + c; };
    return [](double x) { return x * x; };
}

bool radial_stationary(const ReducedScenario& r) { return r.b == "r" || r.b == "r+c"; }

void add_crosscheck(RunReport& rep, const Scenario& sc) {
    const auto& r = sc.reduced;
    CrosscheckSpec cs;
    cs.model = r.model;
    cs.k = r.k;
    cs.l = r.l;
    cs.eps = r.eps;
    cs.b = b_profile(r);
    cs.r_min = r.r_min;
    cs.r_max = r.r_max;
    cs.t_end = sc.flow.t_end;
    const auto a = reduced_vs_full_crosscheck(cs, r.crosscheck_n);
    const auto b = reduced_vs_full_crosscheck(cs, 2 * r.crosscheck_n - 1);
    rep.values.push_back({"crosscheck_discrepancy_coarse", a.discrepancy});
    rep.values.push_back({"crosscheck_discrepancy_fine", b.discrepancy});
    rep.checks.push_back(make_check("crosscheck_discrepancy", b.discrepancy, sc.checks.reduced,
                                    "reduced vs full at " + std::to_string(b.resolution) + " nodes"));
    if (a.discrepancy > 1e-13 && b.discrepancy > 1e-13)
        rep.checks.push_back(make_check("crosscheck_order", std::log2(a.discrepancy / b.discrepancy), 2.0,
                                        "observed order under joint refinement", true));
}

RunReport run_reduced(const Scenario& sc, const std::string& dir) {
    RunReport rep;
    const auto& r = sc.reduced;
    const double dt = sc.flow.dt, T = sc.flow.t_end;
    if (r.model == ReducedModel::S3) {
        rep.description = "S^3 reduced system, k = " + std::to_string(r.k) + ", l = " + std::to_string(r.l);
        const auto st = s3_initial(r.k, r.l, s3_axis(r.eps, r.n));
        const auto tr = s3_evolve(st, dt, T, sc.flow.store_every);
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            const auto& x = tr.states[k];
            std::vector<double> s(x.s.n);
            for (int i = 0; i < x.s.n; ++i) s[i] = x.s.coord(i);
            const std::string path = (fs::path(dir) / (slice_name("reduced", k) + ".csv")).string();
            write_columns(path, sc.name, tr.t[k], {"s", "u", "v", "w"}, {&s, &x.u, &x.v, &x.w});
            rep.files.push_back(path);
        }
        double nd = 0;
        for (double d : tr.norm_defect) nd = std::max(nd, d);
        rep.checks.push_back(make_check("s3_norm_defect_rate", nd / T, sc.checks.reduced, "max norm defect per unit time"));
        if (std::abs(r.k) == std::abs(r.l)) {
            double d = 0;
            for (const auto& x : tr.states)
                for (int i = 0; i < x.s.n; ++i)
                    d = std::max({d, std::abs(x.u[i] - st.u[i]), std::abs(x.v[i] - st.v[i]), std::abs(x.w[i] - st.w[i])});
            rep.checks.push_back(make_check("stationary_drift", d, sc.checks.stationary, "|k| = |l| is a fixed point"));
        }
        rep.values.push_back({"u_final_max", [&] {
                                  double m = 0;
                                  for (double u : tr.states.back().u) m = std::max(m, std::abs(u));
                                  return m;
                              }()});
    } else {
        rep.description = "radial metric, b = " + r.b;
        const auto st = radial_state(line_axis(r.r_min, r.r_max, r.n), b_profile(r));
        const auto tr = radial_evolve(st, r.boundary, dt, T, sc.flow.store_every);
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            const auto& x = tr.states[k];
            std::vector<double> rr(x.r.n);
            for (int i = 0; i < x.r.n; ++i) rr[i] = x.r.coord(i);
            const auto m = radial_rhs(x, r.boundary);
            const std::string path = (fs::path(dir) / (slice_name("reduced", k) + ".csv")).string();
            write_columns(path, sc.name, tr.t[k], {"r", "b", "dt_b"}, {&rr, &x.b, &m});
            rep.files.push_back(path);
        }
        if (radial_stationary(r) && r.boundary.m0 == 0.0) {
            double d = 0;
            for (const auto& x : tr.states)
                for (int i = 0; i < x.r.n; ++i) d = std::max(d, std::abs(x.b[i] - st.b[i]));
            rep.checks.push_back(make_check("stationary_drift", d, sc.checks.stationary, "b = r + c is a fixed point"));
        }
    }
    if (r.crosscheck) add_crosscheck(rep, sc);
    return rep;
}

std::string kind_name(const Scenario& sc) {
    return sc.kind == InitialKind::Preset ? "preset:" + sc.preset : to_string(sc.kind);
}

void finish(RunReport& rep, const Scenario& sc, const std::string& dir, const char* command) {
    rep.command = command;
    rep.scenario = sc.name;
    rep.kind = kind_name(sc);
    rep.out_dir = dir;
    const std::string path = (fs::path(dir) / "summary.json").string();
    write_summary_json(path, rep);
    rep.files.push_back(path);
}

// successive-difference or closed-form errors on the coarse nodes
struct LevelResult {
    VectorField U;                    // 3D
    std::vector<double> a, b, c;      // reduced components
    double exact_error = -1;          // < 0 when no closed form
    int n0 = 0;
    double dt = 0;
};

LevelResult run_level(const Scenario& sc, int level, Exec ex) {
    const Scenario s = refined(sc, level);
    LevelResult out;
    out.dt = s.flow.dt;
    const int m = 1 << level;
    if (s.kind == InitialKind::Reduced) {
        const auto& r = s.reduced;
        out.n0 = r.n;
        if (r.model == ReducedModel::S3) {
            const auto tr = s3_evolve(s3_initial(r.k, r.l, s3_axis(r.eps, r.n)), s.flow.dt, s.flow.t_end);
            const auto& x = tr.states.back();
            for (int i = 0; i < x.s.n; i += m) {
                out.a.push_back(x.u[i]);
                out.b.push_back(x.v[i]);
                out.c.push_back(x.w[i]);
            }
        } else {
            const auto st = radial_state(line_axis(r.r_min, r.r_max, r.n), b_profile(r));
            const auto tr = radial_evolve(st, r.boundary, s.flow.dt, s.flow.t_end);
            const auto& x = tr.states.back();
            double e = 0;
            for (int i = 0; i < x.r.n; i += m) {
                out.a.push_back(x.b[i]);
                e = std::max(e, std::abs(x.b[i] - st.b[i]));
            }
            if (radial_stationary(r) && r.boundary.m0 == 0.0) out.exact_error = e;
        }
        return out;
    }
    const PreparedRun pr = prepare_run(s, ex);
    const Trajectory traj = evolve(pr.initial, pr.flow, ex);
    if (traj.halted) throw DegeneracyError("convergence: level " + std::to_string(level) + " halted: " + traj.halt_reason);
    const Slice& last = traj.slices.back();
    const ChartGrid& fine = last.grid();
    out.n0 = fine.n(0);
    std::array<Axis, 3> ax;
    for (int a = 0; a < 3; ++a) {
        ax[a] = fine.axis(a);
        ax[a].n = fine.axis(a).periodic ? fine.n(a) / m : (fine.n(a) - 1) / m + 1;
    }
    const ChartGrid coarse = make_grid(ax);
    out.U = VectorField(coarse);
    for (std::size_t p = 0; p < coarse.size(); ++p) {
        const auto c = coarse.ijk(p);
        out.U[p] = last.U[fine.index(c[0] * m, c[1] * m, c[2] * m)];
    }
    if (pr.exact_U) {
        const VectorField ex_U = pr.exact_U(last.t);
        double e = 0;
        for (std::size_t p = 0; p < fine.size(); ++p)
            if (fine.boundary_distance(p) >= sc.diag.margin * m) e = std::max(e, (last.U[p] - ex_U[p]).cwiseAbs().maxCoeff());
        out.exact_error = e;
    }
    return out;
}

double level_diff(const LevelResult& x, const LevelResult& y, int margin) {
    double e = 0;
    if (!x.a.empty()) {
        for (std::size_t i = 0; i < x.a.size(); ++i) {
            e = std::max(e, std::abs(x.a[i] - y.a[i]));
            if (!x.b.empty()) e = std::max({e, std::abs(x.b[i] - y.b[i]), std::abs(x.c[i] - y.c[i])});
        }
        return e;
    }
    return max_abs_diff(x.U, y.U, Region{margin}, {});
}

// ---------------- worked examples ----------------

CheckResult ex_check(const std::string& name, double v, double tol, double scale, const std::string& note) {
    return make_check(name, v, tol * scale, note);
}

void circle_examples(std::vector<CheckResult>& out, double ts, int refine, Exec ex) {
    // d phi/dt at t = 0 by integrating the tension along the fibres from Sigma = {x2 = 0}
    {
        const int n = ((49 - 1) << refine) + 1;
        const auto g = make_grid({Axis{0.8, 2.0, n}, Axis{0.0, 1.2, n}, Axis{0, 1, 7}});
        const Slice s = make_slice(0.0, flat_metric(g), sample<Vec3>(g, circle_direction, ex), Lapse{});
        const SurfaceMap phi{sample<cplx>(g, [](const Vec3& x) { return circle_phi(0.0, x); }, ex), Codomain::Plane};
        const auto r = phi_rate(phi, s, SliceSurface{1, 0.0, 0, 0.0}, {}, ex);
        double e = 0;
        std::size_t valid = 0;
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (!r.valid[p]) continue;
            ++valid;
            const Vec3 x = g.point(p);
            e = std::max(e, std::abs(r.dphi_dt[p] + std::atan2(x[1], x[0])));
        }
        out.push_back(ex_check("circle_phi_rate", valid > g.size() / 2 ? e : 1e300, 1e-5, ts,
                               "max |d phi/dt + arg(x1 + i x2)| over " + std::to_string(valid) + " points"));
    }
    // the evolved field stays tangent to the level sets of the closed-form phi_t
    {
        const int n = ((33 - 1) << refine) + 1;
        const auto g = make_grid({Axis{-0.5, 0.5, n}, Axis{0.5, 1.5, n}, Axis{0, 1, 6, true}});
        FlowSpec spec;
        spec.dt = 2.5e-3 / (1 << refine);
        spec.t_end = 0.1;
        spec.store_every = 8 << refine;
        spec.monitor_every = 1 << 30;
        const auto traj = evolve(make_slice(0.0, flat_metric(g), sample<Vec3>(g, circle_direction, ex), Lapse{}), spec, ex);
        PreparedRun pr;
        pr.fibre_gradient = circle_phi_gradient;
        pr.fibre_domain = [](double t, const Vec3& x) { return x[0] * x[0] + x[1] * x[1] > 4 * t * t; };
        double e = traj.halted ? 1e300 : 0.0;
        for (const auto& s : traj.slices) e = std::max(e, fibre_residual(pr, s, 2));
        out.push_back(ex_check("circle_level_sets", e, 1e-4, ts, "max |d phi_t(U_t)| / |d phi_t| on rho^2 > 4 t^2"));
    }
}

void exflat_examples(std::vector<CheckResult>& out, double ts, int refine, Exec ex) {
    const auto s0 = twistor::incidence_example_flat(1.0, Vec4(0, 0, 1, 0));
    out.push_back(ex_check("exflat_point", std::max(std::abs(s0.z - 1.0), (s0.U - Vec3(0, 1, 0)).norm()), 1e-14, ts,
                           "c = 1 at (t, x1, q) = (0, 0, 1): z = 1, U = (0, 1, 0)"));
    // psi_t -> 1/qbar
    const Vec4 x(1e4, 0.3, 0.8, -0.6);
    out.push_back(ex_check("exflat_psi_limit", std::abs(twistor::incidence_psi(1.0, x) - 1.0 / cplx(0.8, 0.6)), 1e-3, ts,
                           "|psi_t - 1/qbar| at t = 1e4"));
    // conformal foliation and its evolution under the constant-curvature flow
    Scenario sc;
    sc.name = "ex-flat";
    sc.preset = "ex-flat";
    sc.t0 = 1.5;
    sc.refine = refine;
    sc.flow.dt = 2.5e-3 / (1 << refine);
    sc.flow.t_end = 0.2;
    sc.flow.store_every = 20 << refine;
    sc.flow.monitor_every = 1 << 30;
    const PreparedRun pr = prepare_run(sc, ex);
    const auto d = slice_diagnostics(pr.initial, Vec3(1, 0, 0), ex);
    out.push_back(ex_check("exflat_sigma", summarize(d, pr.initial.g, Region{2}).max_sigma, 1e-4, ts,
                           "max |sigma| of the direction field at t = 1.5"));
    const auto traj = evolve(pr.initial, pr.flow, ex);
    double eU = traj.halted ? 1e300 : 0.0, eF = eU;
    for (const auto& s : traj.slices) {
        eU = std::max(eU, max_abs_diff(s.U, pr.exact_U(s.t), Region{2}, {}));
        eF = std::max(eF, fibre_residual(pr, s, 2));
    }
    out.push_back(ex_check("exflat_evolution", eU, 1e-4, ts, "evolved U against the closed-form direction field"));
    out.push_back(ex_check("exflat_level_sets", eF, 1e-4, ts, "max |d psi_t(U_t)| / |d psi_t|"));
}

void s3_examples(std::vector<CheckResult>& out, const std::string& which, double ts, int refine) {
    const int n = ((33 - 1) << refine) + 1;
    if (which == "s3-hopf") {
        const auto r = s3_rhs(s3_initial(1, 1, s3_axis(0.1, n)));
        double m = 0;
        for (std::size_t i = 0; i < r.du.size(); ++i) m = std::max({m, std::abs(r.du[i]), std::abs(r.dv[i]), std::abs(r.dw[i])});
        out.push_back(ex_check("s3_hopf_rhs", m, 1e-12, ts, "max |RHS| for k = l = 1"));
        return;
    }
    const auto ax = s3_axis(0.1, n);
    const auto r = s3_rhs(s3_initial(1, 2, ax));
    const int mid = (n - 1) / 2;
    out.push_back(ex_check("s3_kl_du", std::abs(r.du[mid] + 0.6), 1e-12, ts, "du/dt at s = pi/4 for k = 1, l = 2 is -0.6"));
    CrosscheckSpec cs;
    cs.model = ReducedModel::S3;
    const int base = ((17 - 1) << refine) + 1;
    const auto a = reduced_vs_full_crosscheck(cs, base), b = reduced_vs_full_crosscheck(cs, 2 * base - 1);
    out.push_back(make_check("s3_kl_crosscheck_order", std::log2(a.discrepancy / b.discrepancy), 2.0,
                             "reduced vs full discrepancy " + format_double(a.discrepancy) + " -> " +
                                 format_double(b.discrepancy),
                             true));
}

void radial_examples(std::vector<CheckResult>& out, double ts, int refine) {
    const auto ax = line_axis(1.0, 2.0, ((33 - 1) << refine) + 1);
    double m = 0;
    for (double c : {0.0, 0.5, 3.0})
        for (double v : radial_rhs(radial_state(ax, [c](double r) { return r + c; }))) m = std::max(m, std::abs(v));
    out.push_back(ex_check("radial_rhs_stationary", m, 1e-12, ts, "d_t b for b = r + c"));
    const auto st = radial_state(ax, [](double r) { return r; });
    const auto tr = radial_evolve(st, {}, 1e-3, 0.1);
    double d = 0;
    for (int i = 0; i < ax.n; ++i) d = std::max(d, std::abs(tr.states.back().b[i] - st.b[i]));
    out.push_back(ex_check("radial_drift", d, 1e-12, ts, "b = r over 100 steps"));
}

void charge_examples(std::vector<CheckResult>& out, double ts) {
    // radial projection x/|x| to the unit sphere: dilation 1/|x|, fibres along x/|x|
    ChargeInputs in;
    in.lambda = [](const Vec3& x) { return 1.0 / x.norm(); };
    in.U = [](const Vec3& x) { return Vec3(x / x.norm()); };
    in.singular_distance = [](const Vec3& x) { return x.norm(); };
    const double q1 = charge_Q(in, sphere_mesh(Vec3::Zero(), 1.0));
    const double q2 = charge_Q(in, sphere_mesh(Vec3::Zero(), 2.5));
    out.push_back(ex_check("charge_sphere", std::max(std::abs(q1 - 4 * kPi), std::abs(q2 - 4 * kPi)) / (4 * kPi), 1e-6, ts,
                           "|Q - 4 pi| / 4 pi on radii 1 and 2.5"));
    out.push_back(ex_check("charge_radius_independence", std::abs(q1 - q2) / (4 * kPi), 1e-6, ts, "|Q(1) - Q(2.5)| / 4 pi"));
}

void massless_examples(std::vector<CheckResult>& out, double ts) {
    const twistor::Holo3 f = [](cplx, cplx a, cplx) { return 1.0 / a; };
    const Vec4 x(0.1, 0.2, 0.9, -0.4);
    const auto nc = twistor::null_coords(x);
    const cplx p0 = twistor::massless_field(f, 0, nc), p1 = twistor::massless_field(f, 1, nc);
    out.push_back(ex_check("massless_phi0", std::abs(p0 - 1.0 / nc.qb), 1e-10, ts, "phi_0 = 1/qbar"));
    out.push_back(ex_check("massless_phi1", std::abs(p1 + nc.u / (nc.qb * nc.qb)), 1e-10, ts, "phi_1 = -u/qbar^2"));
    const auto [r1, r2] = twistor::recurrence_check(f, 0, nc);
    out.push_back(ex_check("massless_recurrence", std::max(std::abs(r1), std::abs(r2)), 1e-6, ts,
                           "both recurrence residuals for r = 0"));
}

}  // namespace

CheckResult make_check(std::string name, double value, double tol, std::string note, bool at_least) {
    CheckResult c{std::move(name), value, tol, at_least, false, std::move(note)};
    c.pass = std::isfinite(value) && (at_least ? value >= tol : value <= tol);
    return c;
}

bool RunReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

int RunReport::exit_code() const {
    if (degenerate) return 4;
    return all_pass() ? 0 : 3;
}

void write_summary_json(const std::string& path, const RunReport& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["build"] = build_string();
    j["command"] = r.command;
    j["scenario"] = r.scenario;
    j["kind"] = r.kind;
    j["description"] = r.description;
    j["halted"] = r.halted;
    if (r.halted) j["halt_reason"] = r.halt_reason;
    j["exit_code"] = r.exit_code();
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"value", num(c.value)}, {"tol", num(c.tol)},
                          {"bound", c.at_least ? "min" : "max"}, {"pass", c.pass}, {"note", c.note}});
    j["checks"] = checks;
    json values = json::object();
    for (const auto& [k, v] : r.values) values[k] = num(v);
    j["values"] = values;
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    os << j.dump(2) << "\n";
}

RunReport run_scenario(const Scenario& sc, const std::string& out_dir, Exec ex) {
    const std::string dir = prepare_dir(out_dir, sc.name);
    RunReport rep = sc.kind == InitialKind::Reduced ? run_reduced(sc, dir) : run_3d(sc, dir, ex);
    finish(rep, sc, dir, "run");
    return rep;
}

RunReport diagnose_scenario(const Scenario& sc, const std::string& out_dir, Exec ex) {
    const std::string dir = prepare_dir(out_dir, sc.name);
    RunReport rep;
    if (sc.kind == InitialKind::Reduced) {
        const auto& r = sc.reduced;
        if (r.model == ReducedModel::S3) {
            rep.description = "S^3 reduced right-hand side";
            const auto st = s3_initial(r.k, r.l, s3_axis(r.eps, r.n));
            auto rates = s3_rhs(st);
            std::vector<double> s(st.s.n);
            for (int i = 0; i < st.s.n; ++i) s[i] = st.s.coord(i);
            const std::string path = (fs::path(dir) / "reduced_rhs.csv").string();
            write_columns(path, sc.name, 0.0, {"s", "du", "dv", "dw"}, {&s, &rates.du, &rates.dv, &rates.dw});
            rep.files.push_back(path);
            double m = 0;
            for (std::size_t i = 0; i < s.size(); ++i) m = std::max({m, std::abs(rates.du[i]), std::abs(rates.dv[i]), std::abs(rates.dw[i])});
            rep.values.push_back({"max_rhs", m});
            rep.values.push_back({"norm_defect", s3_norm_defect(st)});
        } else {
            rep.description = "radial right-hand side";
            const auto st = radial_state(line_axis(r.r_min, r.r_max, r.n), b_profile(r));
            const auto m = radial_rhs(st, r.boundary);
            std::vector<double> rr(st.r.n);
            for (int i = 0; i < st.r.n; ++i) rr[i] = st.r.coord(i);
            const std::string path = (fs::path(dir) / "reduced_rhs.csv").string();
            write_columns(path, sc.name, 0.0, {"r", "b", "dt_b"}, {&rr, &st.b, &m});
            rep.files.push_back(path);
            double mx = 0;
            for (double v : m) mx = std::max(mx, std::abs(v));
            rep.values.push_back({"max_dt_b", mx});
        }
        finish(rep, sc, dir, "diagnose");
        return rep;
    }
    const PreparedRun pr = prepare_run(sc, ex);
    rep.description = pr.description;
    const Slice& s = pr.initial;
    const auto d = slice_diagnostics(s, pr.flow.frame_seed, ex);
    const auto sum = summarize(d, s.g, Region{sc.diag.margin});
    rep.values.push_back({"max_sigma", sum.max_sigma});
    rep.values.push_back({"max_im_rho", sum.max_im_rho});
    rep.values.push_back({"min_abs_nu", sum.min_abs_nu});
    rep.values.push_back({"max_mu", sum.max_mu});
    const auto st = stationarity_report(s, pr.flow.frame_seed, Region{sc.diag.margin}, ex);
    rep.values.push_back({"stationarity_grad_ln_f_minus_mu", st.grad_ln_f_minus_mu});
    rep.values.push_back({"stationarity_U_f", st.U_f});
    rep.values.push_back({"stationarity_ricci_ZZ", st.ricci_ZZ});
    rep.values.push_back({"stationarity_hessian_ZZ", st.hessian_ZZ});
    const FlowRHS rhs = flow_rhs(s, pr.flow, ex);
    double du = 0, dg = 0;
    for (std::size_t p = 0; p < s.grid().size(); ++p)
        if (s.grid().boundary_distance(p) >= sc.diag.margin) {
            du = std::max(du, rhs.dt_U[p].cwiseAbs().maxCoeff());
            dg = std::max(dg, rhs.dt_g[p].cwiseAbs().maxCoeff());
        }
    rep.values.push_back({"max_dt_U", du});
    rep.values.push_back({"max_dt_g", dg});

    Snapshot snap;
    snap.grid = s.grid();
    snap.t = s.t;
    snap.kind = "diagnostics";
    snap.meta = {{"build", build_string()}, {"scenario", sc.name}};
    snap.add("U", s.U);
    snap.add("sigma", d.sigma);
    snap.add("rho", d.rho);
    snap.add("tau", d.tau);
    snap.add("mu", d.mu);
    snap.add("nu", d.nu);
    snap.add("dt_U", rhs.dt_U);
    const std::string prefix = (fs::path(dir) / "diagnostics").string();
    write_snapshot(prefix, snap);
    rep.files.push_back(prefix + ".csv");
    finish(rep, sc, dir, "diagnose");
    return rep;
}

RunReport convergence_study(const Scenario& sc, int levels, const std::string& out_dir, double min_slope, Exec ex) {
    if (levels < 1) throw SchemaError("convergence needs at least one refinement level");
    const std::string dir = prepare_dir(out_dir, sc.name);
    RunReport rep;
    rep.description = "refinement sweep over " + std::to_string(levels + 1) + " levels";
    std::vector<LevelResult> lv;
    for (int l = 0; l <= levels; ++l) lv.push_back(run_level(sc, l, ex));

    const bool closed = lv.front().exact_error >= 0;
    std::vector<double> err;
    if (closed)
        for (const auto& x : lv) err.push_back(x.exact_error);
    else
        for (int l = 0; l < levels; ++l) err.push_back(level_diff(lv[l], lv[l + 1], sc.diag.margin));
    std::vector<double> slope(err.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 1; k < err.size(); ++k)
        if (err[k] > 0 && err[k - 1] > 0) slope[k] = std::log2(err[k - 1] / err[k]);

    const std::string path = (fs::path(dir) / "convergence.csv").string();
    {
        std::ofstream os(path);
        if (!os) throw DomainError("cannot write " + path);
        os << header_line(sc.name) << " measure=" << (closed ? "closed_form" : "successive_difference") << "\n";
        os << "level,n0,dt,error,slope\n";
        for (std::size_t k = 0; k < err.size(); ++k)
            os << k << ',' << lv[k].n0 << ',' << format_double(lv[k].dt) << ',' << format_double(err[k]) << ','
               << (std::isnan(slope[k]) ? std::string("") : format_double(slope[k])) << "\n";
    }
    rep.files.push_back(path);
    for (std::size_t k = 0; k < err.size(); ++k) rep.values.push_back({"error_" + std::to_string(k), err[k]});

    double worst = 0;
    for (double e : err) worst = std::max(worst, e);
    if (worst < 1e-13) {
        rep.checks.push_back(make_check("convergence", worst, 1e-13, "errors at round-off on every level"));
    } else if (err.size() < 2 || std::isnan(slope.back())) {
        rep.checks.push_back(make_check("convergence_slope", 0.0, min_slope, "too few levels for a slope; use --refine >= 2", true));
    } else {
        rep.checks.push_back(make_check("convergence_slope", slope.back(), min_slope,
                                        closed ? "closed-form error" : "successive differences", true));
    }
    finish(rep, sc, dir, "convergence");
    return rep;
}

std::vector<std::string> example_names() {
    return {"circle", "ex-flat", "s3-hopf", "s3-kl", "radial", "charge", "massless"};
}

std::vector<CheckResult> verify_examples(const std::string& selector, double tol_scale, int refine, Exec ex) {
    if (!(tol_scale > 0)) throw SchemaError("tolerance scale must be > 0");
    if (refine < 0 || refine > 2) throw SchemaError("example refinement must be 0, 1 or 2");
    std::vector<std::string> which;
    if (selector == "all") which = example_names();
    else {
        const auto names = example_names();
        if (std::find(names.begin(), names.end(), selector) == names.end())
            throw SchemaError("unknown example '" + selector + "'");
        which = {selector};
    }
    std::vector<CheckResult> out;
    for (const auto& w : which) {
        if (w == "circle") circle_examples(out, tol_scale, refine, ex);
        else if (w == "ex-flat") exflat_examples(out, tol_scale, refine, ex);
        else if (w == "s3-hopf" || w == "s3-kl") s3_examples(out, w, tol_scale, refine);
        else if (w == "radial") radial_examples(out, tol_scale, refine);
        else if (w == "charge") charge_examples(out, tol_scale);
        else if (w == "massless") massless_examples(out, tol_scale);
    }
    return out;
}

}  // namespace sfr
