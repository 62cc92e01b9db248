#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sfr/riemann3.hpp"

namespace sfr {

// Lapse f(t, x) of the product spacetime -f^2 dt^2 + g_t. Empty fn means f = 1.
struct Lapse {
    std::function<double(double, const Vec3&)> fn;
    std::function<double(double, const Vec3&)> dt_fn;  // optional; differenced in t when absent

    bool is_unit() const { return !fn; }
    double value(double t, const Vec3& x) const { return fn ? fn(t, x) : 1.0; }
    double dt(double t, const Vec3& x) const;
    ScalarField sample(const ChartGrid& g, double t) const;
    ScalarField sample_dt(const ChartGrid& g, double t) const;
};

struct Slice {
    double t = 0.0;
    MetricField g;
    VectorField U;
    ScalarField f;
    ScalarField dt_f;
    std::optional<TensorField> T;
    std::optional<TensorField> dt_g;
    const ChartGrid& grid() const { return g.grid(); }
};

Slice make_slice(double t, MetricField g, VectorField U, const Lapse& lapse);

using Christoffel4Field = Field<Christoffel4>;

// Closed-form Levi-Civita symbols of -f^2 dt^2 + g_t (index 0 is t).
Christoffel4Field christoffel4(const Slice& s, const TensorField& dt_g, const ChristoffelField& gamma3,
                               Exec ex = Exec::Parallel);

// Generic oracle: builds the 4x4 metric on three equally spaced time levels and
// differentiates it (central in t, 4th-order in space).
Christoffel4Field christoffel4_oracle(const std::array<const MetricField*, 3>& g, const std::array<const ScalarField*, 3>& f,
                                      double dt, Exec ex = Exec::Parallel);

// d/dt of the spatial Christoffel symbols given K = dg/dt.
ChristoffelField dt_christoffel(const MetricField& m, const ChristoffelField& gamma3, const TensorField& K,
                                Exec ex = Exec::Parallel);

struct Curvature4 {
    TensorField R0i0j;        // R_{0i0j} = G(R(d_0, d_i) d_0, d_j)
    Field<Rank3> R0ijk;       // R^0_{ijk}
    Field<Riemann3> Rlijk;    // R^l_{ijk}
};

Curvature4 curvature4(const Slice& s, const TensorField& dt_g, const TensorField& dtt_g, Exec ex = Exec::Parallel);

// Full 4D Riemann tensor at selected grid points from five equally spaced levels.
std::vector<Riemann4> riemann4_oracle(const std::array<const MetricField*, 5>& g,
                                      const std::array<const ScalarField*, 5>& f, double dt,
                                      const std::vector<std::size_t>& points);

// W = d_t + f U. first = nabla_W U, second = nabla_W W, components (t, x1, x2, x3).
struct RayDerivs {
    Field<Vec4> first;
    Field<Vec4> second;
};
RayDerivs ray_derivs(const Slice& s, const VectorField& dt_U, const TensorField& dt_g, Exec ex = Exec::Parallel);

// M_ij = G(R(d_t, d_i) U, d_j); needs only dt_g (not its second time derivative).
TensorField mixed_curvature(const Slice& s, const TensorField& dt_g, Exec ex = Exec::Parallel);
// Ricci of the spacetime contracted with (d_t, U).
ScalarField ricci4_tU(const Slice& s, const TensorField& dt_g, Exec ex = Exec::Parallel);
// curv_R = -f Ricci^g + sym M
TensorField curvature_R(const Slice& s, const TensorField& dt_g, const Curvature3* c3 = nullptr,
                        Exec ex = Exec::Parallel);

// T^(U) + 1/2 grad f - 1/2 U(f) U
VectorField geodesic_defect(const Slice& s, const TensorField& T, Exec ex = Exec::Parallel);

}  // namespace sfr
