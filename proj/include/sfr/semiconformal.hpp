#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "sfr/flows.hpp"
#include "sfr/foliation.hpp"
#include "sfr/riemann3.hpp"

namespace sfr {

// Target of a map into a surface, in a conformal chart w with h = s(w)^2 |dw|^2.
enum class Codomain {
    Plane,   // s = 1
    Sphere   // stereographic chart of the unit sphere, s = 2/(1 + |w|^2)
};
double codomain_factor(Codomain c, cplx w);
// d ln s / d(Re w), d ln s / d(Im w)
std::pair<double, double> codomain_dlog(Codomain c, cplx w);

struct SurfaceMap {
    ComplexField w;
    Codomain codomain = Codomain::Plane;
};

// lambda1 >= lambda2 are the singular values of dphi between g and h; energy = (l1^2 + l2^2)/2,
// jacobian = l1 l2, defect = energy - jacobian = (l1 - l2)^2 / 2 (computed in that form).
struct ScAnalysis {
    ScalarField lambda1, lambda2, energy, jacobian, defect;
};
ScAnalysis sc_analysis(const SurfaceMap& phi, const MetricField& m, Exec ex = Exec::Parallel);

// Integral of defect^(3/2) dv_g over the chart (trapezoid on bounded axes, uniform on periodic ones).
double functional_I(const SurfaceMap& phi, const MetricField& m, Exec ex = Exec::Parallel);
double functional_I(const ScAnalysis& a, const MetricField& m);

// Tension trace_g nabla dphi, with the codomain Christoffel term for the sphere chart.
ComplexField tension(const SurfaceMap& phi, const MetricField& m, const ChristoffelField& gamma,
                     Exec ex = Exec::Parallel);
ComplexField tension(const SurfaceMap& phi, const MetricField& m, Exec ex = Exec::Parallel);

ComplexField apply_dphi(const SurfaceMap& phi, const VectorField& V, Exec ex = Exec::Parallel);

// tau(phi) + dphi(nabla_U U), which vanishes for a semi-conformal submersion from a 3-manifold
// to a surface with fibres tangent to U. Points whose defect exceeds defect_tol are not applicable.
struct FundResidual {
    ComplexField residual;
    std::vector<char> applicable;
};
FundResidual fund_residual(const SurfaceMap& phi, const MetricField& m, const VectorField& U, double defect_tol = 1e-6,
                           Exec ex = Exec::Parallel);

// Closed surface x(a, b); b is periodic on [0, 2 pi). a is periodic on [0, 2 pi) or runs over
// [a_min, a_max] with Gauss-Legendre nodes. Orientation: x_a x x_b points outward.
struct ClosedSurfaceMesh {
    std::function<Vec3(double, double)> embed;
    std::function<std::pair<Vec3, Vec3>(double, double)> tangents;  // optional, differenced when empty
    bool a_periodic = false;
    double a_min = 0.0, a_max = 3.141592653589793;
    int na = 48, nb = 96;
};
ClosedSurfaceMesh sphere_mesh(const Vec3& center, double radius, int na = 48, int nb = 96);
ClosedSurfaceMesh ellipsoid_mesh(const Vec3& center, const Vec3& semi_axes, int na = 48, int nb = 96);
// Tube of radius r about the circle of radius R centred at `center` in the plane spanned by e1, e2.
ClosedSurfaceMesh torus_mesh(const Vec3& center, const Vec3& e1, const Vec3& e2, double R, double r, int na = 96,
                             int nb = 96);

struct ChargeInputs {
    std::function<double(const Vec3&)> lambda;
    std::function<Vec3(const Vec3&)> U;
    std::function<Mat3(const Vec3&)> g;  // Euclidean when empty
    // distance to the declared singular set; nodes closer than min_distance are rejected
    std::function<double(const Vec3&)> singular_distance;
    double min_distance = 1e-3;
};
// Q(S) = integral over S of lambda^2 g(U, n) dv_S.
double charge_Q(const ChargeInputs& in, const ClosedSurfaceMesh& S);
// Grid fields, interpolated at the surface nodes.
double charge_Q(const ScalarField& lambda, const VectorField& U, const MetricField& m, const ClosedSurfaceMesh& S,
                const std::function<double(const Vec3&)>& singular_distance = {}, double min_distance = 1e-3);

// Sigma = {x_axis = value}, optionally restricted to x_side > side_min (side < 0: no restriction).
struct SliceSurface {
    int axis = 0;
    double value = 0.0;
    int side = -1;
    double side_min = 0.0;
    double min_transversality = 0.05;  // |g(U, n)| at the crossing
};

struct PhiEvolutionOptions {
    double ds = 0.0;             // 0: half the smallest grid step
    double budget_diameters = 10.0;
    double reach = 1.0;          // grid steps curves may run past bounded faces (cubic extrapolation)
};

struct PhiRate {
    ComplexField dphi_dt;
    std::vector<char> valid;  // curve reached Sigma transversally inside the budget
};

// d phi/dt(x) = -integral over the U-curve from Sigma to x of tau(phi) + dphi(grad f).
// With `trusted`, curves passing where the integrand's stencil touches untrusted values of phi are invalid.
PhiRate phi_rate(const SurfaceMap& phi, const Slice& s, const SliceSurface& sigma, const PhiEvolutionOptions& opt = {},
                 Exec ex = Exec::Parallel, const std::vector<char>* trusted = nullptr);

struct PhiStack {
    std::vector<double> t;
    std::vector<SurfaceMap> maps;
    std::vector<std::vector<char>> valid;
};
// Heun steps between consecutive stored slices of the trajectory.
PhiStack evolve_phi(const SurfaceMap& phi0, const Trajectory& traj, const SliceSurface& sigma,
                    const PhiEvolutionOptions& opt = {}, Exec ex = Exec::Parallel);

// d(dphi/dt)(U) + tau(phi) + dphi(grad f): zero for an evolution with fibres along U.
ComplexField evolution_residual(const SurfaceMap& phi, const ComplexField& dphi_dt, const Slice& s,
                                Exec ex = Exec::Parallel);

}  // namespace sfr
