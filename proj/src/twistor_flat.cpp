#include "sfr/twistor_flat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sfr/fd.hpp"

namespace sfr::twistor {

namespace {
constexpr cplx I(0.0, 1.0);

cplx ipow(cplx a, int n) {
    cplx r = 1.0;
    for (int m = 0; m < n; ++m) r *= a;
    return r;
}
}  // namespace

NullCoords null_coords(const Vec4& x) {
    const cplx q(x[2], x[3]);
    return {x[0] + x[1], x[0] - x[1], q, std::conj(q)};
}

Jet operator+(const Jet& a, const Jet& b) {
    Jet r(a.v + b.v);
    for (int k = 0; k < 4; ++k) r.d[k] = a.d[k] + b.d[k];
    return r;
}
Jet operator-(const Jet& a, const Jet& b) {
    Jet r(a.v - b.v);
    for (int k = 0; k < 4; ++k) r.d[k] = a.d[k] - b.d[k];
    return r;
}
Jet operator-(const Jet& a) {
    Jet r(-a.v);
    for (int k = 0; k < 4; ++k) r.d[k] = -a.d[k];
    return r;
}
Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v * b.v);
    for (int k = 0; k < 4; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    return r;
}
Jet operator/(const Jet& a, const Jet& b) {
    Jet r(a.v / b.v);
    for (int k = 0; k < 4; ++k) r.d[k] = (a.d[k] * b.v - a.v * b.d[k]) / (b.v * b.v);
    return r;
}
Jet conj(const Jet& a) {
    Jet r(std::conj(a.v));
    for (int k = 0; k < 4; ++k) r.d[k] = std::conj(a.d[k]);
    return r;
}

NullJets null_jets(const Vec4& x) {
    const Jet t = Jet::variable(x[0], 0), x1 = Jet::variable(x[1], 1), x2 = Jet::variable(x[2], 2),
              x3 = Jet::variable(x[3], 3);
    return {t + x1, t - x1, x2 + Jet(I) * x3, x2 - Jet(I) * x3};
}

std::pair<cplx, cplx> sfr_residual(const Jet& mu) {
    const cplx m = mu.v, dq = mu.dq(), dqb = mu.dqb();
    return {m * mu.d[1] - m * m * dq + dqb, m * mu.d[0] + m * m * dq + dqb};
}

MobiusField sample_mobius(const std::function<cplx(const Vec4&)>& mu, const ChartGrid& grid, double t0, double dt,
                          int nlevels, Exec ex) {
    MobiusField f{grid, t0, dt, {}, {}};
    for (int k = 0; k < nlevels; ++k) {
        const double t = t0 + k * dt;
        ComplexField lv(grid);
        std::vector<char> ok(grid.size(), 1);
        for_each_index(grid.size(), ex, [&](std::size_t p) {
            const Vec3 x = grid.point(p);
            const cplx m = mu(Vec4(t, x[0], x[1], x[2]));
            if (!std::isfinite(m.real()) || !std::isfinite(m.imag()) || std::abs(m) > kPoleLimit) {
                ok[p] = 0;
                lv[p] = 0.0;
            } else {
                lv[p] = m;
            }
        });
        f.levels.push_back(std::move(lv));
        f.valid.push_back(std::move(ok));
    }
    return f;
}

std::pair<ComplexField, ComplexField> sfr_residual(const MobiusField& mu, int k, Exec ex) {
    const int n = static_cast<int>(mu.levels.size());
    if (k < 2 || k > n - 3) throw DomainError("sfr_residual: level needs two neighbours on each side in t");
    const ComplexField& m = mu.levels[k];
    const auto d = gradient(m, ex);
    std::pair<ComplexField, ComplexField> r{ComplexField(mu.grid), ComplexField(mu.grid)};
    for_each_index(mu.grid.size(), ex, [&](std::size_t p) {
        const cplx dt = (mu.levels[k - 2][p] - 8.0 * mu.levels[k - 1][p] + 8.0 * mu.levels[k + 1][p] -
                         mu.levels[k + 2][p]) /
                        (12.0 * mu.dt);
        const cplx dq = 0.5 * (d[1][p] - I * d[2][p]), dqb = 0.5 * (d[1][p] + I * d[2][p]);
        const cplx v = m[p];
        r.first[p] = v * d[0][p] - v * v * dq + dqb;
        r.second[p] = v * dt + v * v * dq + dqb;
    });
    return r;
}

Vec3 direction(cplx mu) {
    const double a = std::norm(mu);
    return Vec3(a - 1, 2 * mu.real(), 2 * mu.imag()) / (a + 1);
}

VectorField direction_field(const ComplexField& mu, Exec ex) {
    return map_field<Vec3>(mu, [](const cplx& m, std::size_t) { return direction(m); }, ex);
}

VectorField direction_field(const std::function<cplx(const Vec4&)>& mu, const ChartGrid& grid, double t, Exec ex) {
    return sample<Vec3>(grid, [&](const Vec3& x) { return direction(mu(Vec4(t, x[0], x[1], x[2]))); }, ex);
}

cplx KerrFunction::eval(cplx a0, cplx a1, cplx a2) const {
    cplx s = 0.0;
    for (const auto& t : terms) s += t.c * ipow(a0, t.i) * ipow(a1, t.j) * ipow(a2, t.k);
    return s;
}

std::array<cplx, 3> KerrFunction::grad(cplx a0, cplx a1, cplx a2) const {
    std::array<cplx, 3> g{0.0, 0.0, 0.0};
    for (const auto& t : terms) {
        if (t.i > 0) g[0] += t.c * double(t.i) * ipow(a0, t.i - 1) * ipow(a1, t.j) * ipow(a2, t.k);
        if (t.j > 0) g[1] += t.c * double(t.j) * ipow(a0, t.i) * ipow(a1, t.j - 1) * ipow(a2, t.k);
        if (t.k > 0) g[2] += t.c * double(t.k) * ipow(a0, t.i) * ipow(a1, t.j) * ipow(a2, t.k - 1);
    }
    return g;
}

void KerrFunction::validate() const {
    bool any = false;
    for (const auto& t : terms) {
        if (t.i < 0 || t.j < 0 || t.k < 0) throw SchemaError("Kerr function: negative exponent");
        any = any || t.c != 0.0;
    }
    if (!any) throw SchemaError("Kerr function is identically zero");
}

std::string KerrFunction::describe() const {
    std::ostringstream os;
    for (std::size_t n = 0; n < terms.size(); ++n) {
        const auto& t = terms[n];
        if (n) os << " + ";
        os << "(" << t.c.real() << (t.c.imag() < 0 ? "" : "+") << t.c.imag() << "i) a0^" << t.i << " a1^" << t.j
           << " a2^" << t.k;
    }
    os << (form == KerrForm::Default ? "  [F(mu, mu v - q, mu qbar - u)]" : "  [F(z, z u + q, z qbar + v)]");
    return os.str();
}

KerrFunction kerr_alpha() { return {{{1.0, 0, 1, 0}}, KerrForm::Default}; }
KerrFunction kerr_alpha_minus_beta(cplx c) { return {{{1.0, 0, 1, 0}, {-c, 0, 0, 1}}, KerrForm::Default}; }

namespace {

// Second and third arguments of F and their w-derivatives.
struct Args {
    cplx A, B, dA, dB;
};
Args args(KerrForm form, cplx w, const NullCoords& n) {
    if (form == KerrForm::Default) return {w * n.v - n.q, w * n.qb - n.u, n.v, n.qb};
    return {w * n.u + n.q, w * n.qb + n.v, n.u, n.qb};
}

}  // namespace

KerrRoot kerr_solve(const KerrFunction& F, const Vec4& x, cplx seed, const RootOptions& opt) {
    const NullCoords n = null_coords(x);
    auto G = [&](cplx w) {
        const Args a = args(F.form, w, n);
        return F.eval(w, a.A, a.B);
    };
    auto dG = [&](cplx w) {
        const Args a = args(F.form, w, n);
        const auto g = F.grad(w, a.A, a.B);
        return g[0] + g[1] * a.dA + g[2] * a.dB;
    };
    KerrRoot r;
    cplx w = seed;
    cplx gw = G(w);
    for (int it = 0; it < opt.max_iter; ++it) {
        r.iterations = it;
        const double scale = 1.0 + std::abs(w);
        if (std::abs(gw) <= opt.tol * scale) {
            r.converged = true;
            break;
        }
        const cplx d = dG(w);
        if (d == 0.0) break;
        const cplx step = gw / d;
        double lam = 1.0;
        cplx wn = w - step, gn = G(wn);
        while (std::abs(gn) > std::abs(gw) && lam > 1e-6) {
            lam *= 0.5;
            wn = w - lam * step;
            gn = G(wn);
        }
        const bool stalled = std::abs(wn - w) <= 1e-16 * scale;
        w = wn;
        gw = gn;
        if (stalled) {
            r.converged = std::abs(gw) <= 1e3 * opt.tol * scale;
            break;
        }
    }
    if (!r.converged && std::abs(gw) <= opt.tol * (1.0 + std::abs(w))) r.converged = true;
    r.value = w;
    r.residual = std::abs(gw);
    return r;
}

std::optional<Jet> kerr_jet(const KerrFunction& F, const Vec4& x, cplx seed, const RootOptions& opt) {
    const KerrRoot root = kerr_solve(F, x, seed, opt);
    if (!root.converged) return std::nullopt;
    const cplx w = root.value;
    const NullCoords n = null_coords(x);
    const NullJets nj = null_jets(x);
    const Args a = args(F.form, w, n);
    const auto g = F.grad(w, a.A, a.B);
    const cplx Gw = g[0] + g[1] * a.dA + g[2] * a.dB;
    if (Gw == 0.0) return std::nullopt;
    // x-dependence of the second and third arguments at fixed w
    Jet A, B;
    if (F.form == KerrForm::Default) {
        A = Jet(w) * nj.v - nj.q;
        B = Jet(w) * nj.qb - nj.u;
    } else {
        A = Jet(w) * nj.u + nj.q;
        B = Jet(w) * nj.qb + nj.v;
    }
    Jet out(w);
    for (int k = 0; k < 4; ++k) out.d[k] = -(g[1] * A.d[k] + g[2] * B.d[k]) / Gw;
    return out;
}

KerrGrid kerr_grid(const KerrFunction& F, const ChartGrid& grid, double t, cplx seed, double jump_tol,
                   const RootOptions& opt) {
    F.validate();
    KerrGrid out{ComplexField(grid), std::vector<char>(grid.size(), 0), {}, {}};
    const int n0 = grid.n(0), n1 = grid.n(1), n2 = grid.n(2);
    auto solve_at = [&](std::size_t p, cplx s) {
        const Vec3 x = grid.point(p);
        const KerrRoot r = kerr_solve(F, Vec4(t, x[0], x[1], x[2]), s, opt);
        out.mu[p] = r.value;
        out.ok[p] = r.converged;
        return r.converged;
    };
    // line starts (k = 0): sequential along axis 1, plane starts along axis 0
    cplx plane_seed = seed;
    for (int i = 0; i < n0; ++i) {
        cplx s = plane_seed;
        for (int j = 0; j < n1; ++j) {
            const std::size_t p = grid.index(i, j, 0);
            if (solve_at(p, s)) s = out.mu[p];
            if (j == 0 && out.ok[p]) plane_seed = out.mu[p];
        }
    }
    const std::size_t lines = static_cast<std::size_t>(n0) * n1;
    for_each_index(lines, Exec::Parallel, [&](std::size_t l) {
        const int i = static_cast<int>(l) / n1, j = static_cast<int>(l) % n1;
        cplx s = out.mu[grid.index(i, j, 0)];
        for (int k = 1; k < n2; ++k) {
            const std::size_t p = grid.index(i, j, k);
            if (solve_at(p, s)) s = out.mu[p];
        }
    });
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (!out.ok[p]) {
            out.failures.push_back(p);
            continue;
        }
        const auto c = grid.ijk(p);
        if (c[2] > 0) {
            const std::size_t q = grid.index(c[0], c[1], c[2] - 1);
            if (out.ok[q] && std::abs(out.mu[p] - out.mu[q]) > jump_tol * (1.0 + std::abs(out.mu[q])))
                out.jumps.push_back(p);
        }
    }
    return out;
}

std::string to_string(Identification id) {
    switch (id) {
        case Identification::Z: return "z";
        case Identification::MinusZ: return "-z";
        case Identification::InvZ: return "1/z";
        case Identification::MinusInvZ: return "-1/z";
        case Identification::ConjZ: return "zbar";
        case Identification::MinusConjZ: return "-zbar";
        case Identification::InvConjZ: return "1/zbar";
        case Identification::MinusInvConjZ: return "-1/zbar";
    }
    return "?";
}

Jet apply(Identification id, const Jet& z) {
    const Jet one(1.0);
    switch (id) {
        case Identification::Z: return z;
        case Identification::MinusZ: return -z;
        case Identification::InvZ: return one / z;
        case Identification::MinusInvZ: return -(one / z);
        case Identification::ConjZ: return conj(z);
        case Identification::MinusConjZ: return -conj(z);
        case Identification::InvConjZ: return one / conj(z);
        case Identification::MinusInvConjZ: return -(one / conj(z));
    }
    return z;
}

std::vector<IdentificationScore> identification_search(const MuJetFn& z, const std::vector<Vec4>& points) {
    std::vector<IdentificationScore> out;
    std::vector<Jet> zs;
    for (const auto& x : points) zs.push_back(z(x));
    for (auto id : kAllIdentifications) {
        double m = 0;
        for (const auto& zj : zs) {
            const auto r = sfr_residual(apply(id, zj));
            m = std::max(m, std::abs(r.first) + std::abs(r.second));
        }
        out.push_back({id, m});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.max_residual < b.max_residual; });
    return out;
}

double n5_defect(cplx xi0, cplx xi1, cplx eta0, cplx eta1) {
    return (xi0 * std::conj(eta0) + xi1 * std::conj(eta1) + std::conj(xi0) * eta0 + std::conj(xi1) * eta1).real();
}

Jet incidence_z(cplx c, const Vec4& x) {
    const NullJets n = null_jets(x);
    return n.qb / (n.v + Jet(c));
}

cplx incidence_psi(cplx c, const Vec4& x) {
    const double t = x[0];
    const double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    const cplx qb(x[2], -x[3]);
    return (r2 - 2.0 * x[1] * (c + t) + (t + c) * (t + c)) / (t * t * qb);
}

IncidenceSample incidence_example_flat(cplx c, const Vec4& x) {
    const NullCoords n = null_coords(x);
    if (std::abs(n.v + c) < 1e-12 || std::abs(n.q) < 1e-12) throw DomainError("incidence example: pole");
    IncidenceSample s;
    s.z = n.qb / (n.v + c);
    s.U = direction(s.z);
    s.U_conj = direction(std::conj(s.z));
    s.psi = x[0] != 0.0 ? incidence_psi(c, x) : cplx(std::nan(""), std::nan(""));
    return s;
}

cplx massless_field(const Holo3& f, int r, const NullCoords& x, const ContourOptions& opt) {
    auto trap = [&](int N, double& peak, std::vector<double>& mags) {
        cplx s = 0.0;
        peak = 0;
        mags.assign(N, 0.0);
        for (int m = 0; m < N; ++m) {
            const double th = 2 * std::numbers::pi * m / N;
            const cplx z = opt.radius * std::exp(I * th);
            // dz = i z dth, so (1/2 pi i) f dz = (1/N) z f per node
            const cplx val = ipow(z, r) * f(z, x.u + z * x.qb, x.q + z * x.v) * z;
            mags[m] = std::abs(val);
            peak = std::max(peak, mags[m]);
            s += val;
        }
        return s / double(N);
    };
    double peak = 0;
    std::vector<double> mags;
    int N = opt.nodes;
    cplx prev = trap(N, peak, mags);
    for (;;) {
        auto sorted = mags;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        const double med = sorted[sorted.size() / 2];
        if (!std::isfinite(peak) || (med > 0 && peak / med > opt.spike))
            throw DomainError("massless_field: integrand has a pole on or near the contour; change the radius");
        if (N * 2 > opt.max_nodes) break;
        N *= 2;
        const cplx next = trap(N, peak, mags);
        const bool done = std::abs(next - prev) <= opt.tol * std::max(1.0, std::abs(next));
        prev = next;
        if (done) break;
    }
    return prev;
}

cplx massless_field(const Holo3& f, int r, const Vec4& x, const ContourOptions& opt) {
    return massless_field(f, r, null_coords(x), opt);
}

std::pair<cplx, cplx> recurrence_check(const Holo3& f, int r, const NullCoords& x, double h, const ContourOptions& opt) {
    // 4th-order central difference of phi_s along one null coordinate
    auto deriv = [&](int s, int which) {
        auto at = [&](double e) {
            NullCoords y = x;
            (which == 0 ? y.u : which == 1 ? y.v : which == 2 ? y.q : y.qb) += e;
            return massless_field(f, s, y, opt);
        };
        return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
    };
    return {deriv(r, 3) - deriv(r + 1, 0), deriv(r, 1) - deriv(r + 1, 2)};
}

}  // namespace sfr::twistor
