#pragma once

#include <vector>

#include "sfr/riemann3.hpp"

namespace sfr {

// Orthonormal pair spanning U-perp, (X, Y, U) right-handed; Z = X - iY.
struct Frame2 {
    VectorField X;
    VectorField Y;
    Vec3 seed{1, 0, 0};
    std::vector<std::size_t> fallback_points;  // where the seed was too close to U
    CVec3 Z(std::size_t p) const { return X[p].cast<cplx>() - cplx(0, 1) * Y[p].cast<cplx>(); }
};

inline constexpr double kSeedCosLimit = 0.9;

// Throws DomainError if |g(U,U) - 1| exceeds unit_tol anywhere.
Frame2 complementary_frame(const MetricField& m, const VectorField& U, const Vec3& seed = Vec3(1, 0, 0),
                           double unit_tol = 1e-6, Exec ex = Exec::Parallel);

// Re-orthonormalises prev against new (g, U) keeping X as close as possible to the old X.
Frame2 continue_frame(const Frame2& prev, const MetricField& m, const VectorField& U, Exec ex = Exec::Parallel);

struct FoliationDiagnostics {
    ComplexField sigma;      // g(nabla_Z U, Z)
    ComplexField sigma_lie;  // 1/2 (L_U g)(Z, Z)
    ComplexField rho;        // g(nabla_Zbar U, Z)
    ComplexField tau;        // g(nabla_U Z, Zbar)
    VectorField mu;          // nabla_U U
    ScalarField nu;          // g(U, nabla_X X + nabla_Y Y)
    ScalarField im_rho;      // g(U, [X, Y])
};

FoliationDiagnostics diagnostics(const MetricField& m, const ChristoffelField& gamma, const VectorField& U,
                                 const Frame2& frame, Exec ex = Exec::Parallel);
FoliationDiagnostics diagnostics(const MetricField& m, const VectorField& U, const Frame2& frame,
                                 Exec ex = Exec::Parallel);

// Points used for summaries: at least `margin` steps from a non-periodic face, and mask[p] != 0 if given.
struct Region {
    int margin = 0;
    const std::vector<char>* mask = nullptr;
    bool contains(const ChartGrid& g, std::size_t p) const {
        return g.boundary_distance(p) >= margin && (!mask || (*mask)[p]);
    }
};

struct DiagSummary {
    double max_sigma = 0;
    double max_im_rho = 0;
    double min_abs_nu = 0;
    double max_mu = 0;
};
DiagSummary summarize(const FoliationDiagnostics& d, const MetricField& m, const Region& r = {});

struct ConformalityReport {
    bool conformal = false;
    bool integrable = false;
    double max_sigma = 0;
    double max_im_rho = 0;
};
ConformalityReport conformality_report(const FoliationDiagnostics& d, const MetricField& m, double tol,
                                       const Region& r = {});

}  // namespace sfr
