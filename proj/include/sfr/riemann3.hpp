#pragma once

#include "sfr/fd.hpp"
#include "sfr/grid.hpp"

namespace sfr {

struct MetricField {
    TensorField g;
    TensorField ginv;
    ScalarField sqrt_det;
    const ChartGrid& grid() const { return g.grid; }
};

// Symmetrises g and checks positive-definiteness; throws DegeneracyError naming
// the first offending grid point.
MetricField make_metric(TensorField g, Exec ex = Exec::Parallel);
MetricField flat_metric(const ChartGrid& grid);

using ChristoffelField = Field<Christoffel3>;

ChristoffelField christoffel3(const MetricField& m, Exec ex = Exec::Parallel);

struct Curvature3 {
    Field<Riemann3> riemann;  // empty when not requested
    TensorField ricci;        // symmetrised, Ricci(b,c) = R^a_abc
    ScalarField scalar;
};

// Curvature from finite differences of the Christoffel field.
Curvature3 curvature3(const MetricField& m, const ChristoffelField& gamma, Exec ex = Exec::Parallel,
                      bool keep_riemann = true);

// (L_U g)_ij = U^k d_k g_ij + g_kj d_i U^k + g_ik d_j U^k
TensorField lie_metric(const MetricField& m, const VectorField& U, Exec ex = Exec::Parallel);

// J(k, i) = d_i U^k
TensorField jacobian(const VectorField& U, Exec ex = Exec::Parallel);
// A(k, i) = (nabla_i U)^k
TensorField cov_jacobian(const ChristoffelField& gamma, const VectorField& U, Exec ex = Exec::Parallel);
// (nabla_V W)^k = V^i d_i W^k + Gamma^k_ij V^i W^j
VectorField cov_deriv(const ChristoffelField& gamma, const VectorField& V, const VectorField& W,
                      Exec ex = Exec::Parallel);
VectorField grad_scalar(const MetricField& m, const ScalarField& f, Exec ex = Exec::Parallel);
ScalarField directional(const VectorField& V, const ScalarField& f, Exec ex = Exec::Parallel);
// (nabla d f)_ij = d_i d_j f - Gamma^k_ij d_k f
TensorField hessian(const ChristoffelField& gamma, const ScalarField& f, Exec ex = Exec::Parallel);

// Metric cross product (A x B)^i = sqrt(det g) g^il eps_ljk A^j B^k; right-handed in the chart orientation.
Vec3 cross_g(const Mat3& ginv, double sqrt_det, const Vec3& a, const Vec3& b);

namespace reference {
// Plain-loop serial versions kept to cross-check the parallel kernels.
ScalarField partial(const ScalarField& f, int axis);
ChristoffelField christoffel3(const MetricField& m);
}  // namespace reference

}  // namespace sfr
