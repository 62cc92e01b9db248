#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfr/grid.hpp"

namespace sfr::twistor {

// Minkowski point (t, x1, x2, x3); null coordinates u = t + x1, v = t - x1, q = x2 + i x3.
struct NullCoords {
    cplx u, v, q, qb;
};
NullCoords null_coords(const Vec4& x);

// Complex value with first partials in (t, x1, x2, x3).
struct Jet {
    cplx v{0.0};
    std::array<cplx, 4> d{};

    Jet() = default;
    Jet(cplx val) : v(val) {}  // NOLINT: constants promote implicitly
    Jet(double val) : v(val) {}  // NOLINT

    static Jet variable(double val, int axis) {
        Jet j(val);
        j.d[axis] = 1.0;
        return j;
    }
    cplx dq() const { return 0.5 * (d[2] - cplx(0, 1) * d[3]); }
    cplx dqb() const { return 0.5 * (d[2] + cplx(0, 1) * d[3]); }
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet conj(const Jet& a);

struct NullJets {
    Jet u, v, q, qb;
};
NullJets null_jets(const Vec4& x);

using MuJetFn = std::function<Jet(const Vec4&)>;

// SFR equations in the (t, x1, q) form: r1 = mu d1 mu - mu^2 dq mu + dqb mu, r2 = mu dt mu + mu^2 dq mu + dqb mu.
std::pair<cplx, cplx> sfr_residual(const Jet& mu);

// mu sampled on a t-stack of 3D grids at uniform spacing dt.
struct MobiusField {
    ChartGrid grid;
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<ComplexField> levels;
    std::vector<std::vector<char>> valid;  // 0 at poles / non-finite samples
    double time(int k) const { return t0 + k * dt; }
};

inline constexpr double kPoleLimit = 1e8;

MobiusField sample_mobius(const std::function<cplx(const Vec4&)>& mu, const ChartGrid& grid, double t0, double dt,
                          int nlevels, Exec ex = Exec::Parallel);

// Finite-difference residuals at level k (4th order in space; 4th order central in t, needs 2 <= k <= n-3).
std::pair<ComplexField, ComplexField> sfr_residual(const MobiusField& mu, int k, Exec ex = Exec::Parallel);

// U = (|mu|^2 - 1, 2 mu)/(|mu|^2 + 1) read as (U1, U2 + i U3).
Vec3 direction(cplx mu);
VectorField direction_field(const ComplexField& mu, Exec ex = Exec::Parallel);
VectorField direction_field(const std::function<cplx(const Vec4&)>& mu, const ChartGrid& grid, double t,
                            Exec ex = Exec::Parallel);

// Polynomial F(a0, a1, a2) = sum c a0^i a1^j a2^k in three complex variables.
struct KerrTerm {
    cplx c;
    int i = 0, j = 0, k = 0;
};

enum class KerrForm {
    Default,  // F(mu, mu v - q, mu qbar - u) = 0, root is mu
    Printed   // F(z, z u + q, z qbar + v) = 0, root is z (needs an identification to give mu)
};

struct KerrFunction {
    std::vector<KerrTerm> terms;
    KerrForm form = KerrForm::Default;

    cplx eval(cplx a0, cplx a1, cplx a2) const;
    std::array<cplx, 3> grad(cplx a0, cplx a1, cplx a2) const;
    void validate() const;  // throws SchemaError when empty or all-zero
    std::string describe() const;
};

KerrFunction kerr_alpha();              // F = a1
KerrFunction kerr_alpha_minus_beta(cplx c);  // F = a1 - c a2

struct KerrRoot {
    cplx value{0.0};
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

struct RootOptions {
    int max_iter = 60;
    double tol = 1e-14;
};

// Damped Newton on G(w) = F(w, A(w, x), B(w, x)) from seed.
KerrRoot kerr_solve(const KerrFunction& F, const Vec4& x, cplx seed, const RootOptions& opt = {});
// Root with its first partials by implicit differentiation; nullopt when Newton fails.
std::optional<Jet> kerr_jet(const KerrFunction& F, const Vec4& x, cplx seed, const RootOptions& opt = {});

struct KerrGrid {
    ComplexField mu;
    std::vector<char> ok;
    std::vector<std::size_t> failures;  // non-converged points
    std::vector<std::size_t> jumps;     // neighbour-to-neighbour jump above threshold
};
// Continuation over a t-slice: each line along axis 2 is swept from a seeded start, each point seeded
// with the previous root; line starts are seeded along axis 1, plane starts along axis 0.
KerrGrid kerr_grid(const KerrFunction& F, const ChartGrid& grid, double t, cplx seed, double jump_tol = 0.5,
                   const RootOptions& opt = {});

enum class Identification { Z, MinusZ, InvZ, MinusInvZ, ConjZ, MinusConjZ, InvConjZ, MinusInvConjZ };
inline constexpr std::array<Identification, 8> kAllIdentifications{
    Identification::Z,     Identification::MinusZ,     Identification::InvZ,     Identification::MinusInvZ,
    Identification::ConjZ, Identification::MinusConjZ, Identification::InvConjZ, Identification::MinusInvConjZ};
std::string to_string(Identification id);
Jet apply(Identification id, const Jet& z);

struct IdentificationScore {
    Identification id;
    double max_residual;  // max over points of |r1| + |r2|
};
// Scores every candidate mu = id(z) by the SFR residuals at the given points, best first.
std::vector<IdentificationScore> identification_search(const MuJetFn& z, const std::vector<Vec4>& points);

// xi0 conj(eta0) + xi1 conj(eta1) + conj(xi0) eta0 + conj(xi1) eta1
double n5_defect(cplx xi0, cplx xi1, cplx eta0, cplx eta1);

// Surface (z, w) -> [-i c z / sqrt 2, w, z, 1]; incidence gives z = qbar / (v + c).
struct IncidenceSample {
    cplx z;
    Vec3 U;           // (|z|^2 - 1, 2z)/(1 + |z|^2)
    Vec3 U_conj;      // same with zbar, the identification that satisfies the SFR equations
    cplx psi;         // (|x|^2 - 2 x1 (c + t) + (t + c)^2) / (t^2 qbar), needs t != 0
};
IncidenceSample incidence_example_flat(cplx c, const Vec4& x);
Jet incidence_z(cplx c, const Vec4& x);
cplx incidence_psi(cplx c, const Vec4& x);

// phi_r = (1/2 pi i) contour integral of z^r f(z, u + z qbar, q + z v) dz on |z| = radius.
using Holo3 = std::function<cplx(cplx, cplx, cplx)>;
struct ContourOptions {
    double radius = 1.0;
    int nodes = 128;
    int max_nodes = 1 << 14;
    double tol = 1e-12;
    double spike = 1e8;  // integrand peak / median above this flags a pole on the contour
};
cplx massless_field(const Holo3& f, int r, const NullCoords& x, const ContourOptions& opt = {});
cplx massless_field(const Holo3& f, int r, const Vec4& x, const ContourOptions& opt = {});

// d phi_r/d qbar - d phi_{r+1}/d u and d phi_r/d v - d phi_{r+1}/d q, with u, v, q, qbar independent
// (zeta identified with q), 4th-order central differences with step h.
std::pair<cplx, cplx> recurrence_check(const Holo3& f, int r, const NullCoords& x, double h = 1e-3,
                                       const ContourOptions& opt = {});

}  // namespace sfr::twistor
