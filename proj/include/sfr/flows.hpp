#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sfr/foliation.hpp"
#include "sfr/spacetime4.hpp"

namespace sfr {

enum class FlowVariant { SFR, ConstCurvCFGR, IntegrableCFGR, Custom };

std::string to_string(FlowVariant v);
FlowVariant parse_variant(const std::string& s);  // throws SchemaError

inline constexpr double kOff = std::numeric_limits<double>::infinity();

// Breach thresholds; kOff disables a check.
struct FlowTolerances {
    double unit = 1e-6;          // max |g(U,U) - 1|
    double ray = 1e-3;           // max |nabla_{d_t + fU} U|, stencil-level (no discrete product rule)
    double geodesic = 1e-6;      // max |T^(U) + 1/2 grad f - 1/2 U(f) U|
    double sfr_identity = 1e-8;  // max |f sigma + T(Z,Z)|, SFR only
    double sigma = kOff;         // max |sigma|, CFGR variants
    double im_rho = kOff;        // max |Im rho|, CFGR variants
    double nu_ratio = 0.5;       // IntegrableCFGR: min|nu| must stay above nu_ratio * initial
};

// Options of the IntegrableCFGR solve for K = dt_g (see build_T).
struct IntegrableOptions {
    double nu_min = 1e-6;
    int max_sweeps = 30;
    double sweep_tol = 1e-12;
};

struct FlowSpec {
    FlowVariant variant = FlowVariant::ConstCurvCFGR;
    Lapse lapse;
    double dt = 1e-3;
    double t_end = 0.1;
    Vec3 frame_seed{1, 0, 0};
    FlowTolerances tol;
    IntegrableOptions integrable;
    // Custom variant: T as a function of the slice. dt_g = -2 theta.df + 2T, dt_U = -f nabla_U U + grad f.
    std::function<TensorField(const Slice&)> custom_T;
    int store_every = 1;    // stored slices: every k-th step plus the last
    int monitor_every = 1;
    int margin = 2;         // grid steps excluded from monitor maxima near non-periodic faces
    bool halt_on_breach = true;
    bool shear4 = false;    // also monitor the spacetime shear via christoffel4 (costly)

    void validate() const;  // throws SchemaError
};

struct FlowRHS {
    VectorField dt_U;
    TensorField dt_g;
    TensorField T;
};

// theta = g(U, .); P = I - U theta projects onto U-perp.
TensorField build_T(const Slice& s, const FlowSpec& spec, Exec ex = Exec::Parallel);
FlowRHS flow_rhs(const Slice& s, const FlowSpec& spec, Exec ex = Exec::Parallel);

// IntegrableCFGR: solves K = -(4/nu) P curv_R(K) P with K(U, .) = 0 for K = dt_g. The relation is
// an ODE along U for K; it is integrated along the chart axis most aligned with U from the
// inflow face (K = 0 there), transverse derivatives lagged and iterated.
struct IntegrableSolve {
    TensorField K;
    int sweeps = 0;
    double last_change = 0;
    int axis = 0;
};
IntegrableSolve solve_integrable_K(const Slice& s, const IntegrableOptions& opt, Exec ex = Exec::Parallel);

struct MonitorRecord {
    int step = 0;
    double t = 0;
    double unit = 0;
    double ray = 0;
    double geodesic = 0;
    double sfr_identity = 0;
    double shear4 = 0;
    double max_sigma = 0;
    double max_im_rho = 0;
    double min_abs_nu = 0;
};

struct Trajectory {
    std::vector<Slice> slices;
    std::vector<int> slice_steps;
    std::vector<MonitorRecord> monitors;
    bool halted = false;
    std::string halt_reason;
    double dt = 0;
};

// Classical RK4 in time; the flow is evaluated on the state (g, U) with lapse from spec.
Trajectory evolve(const Slice& initial, const FlowSpec& spec, Exec ex = Exec::Parallel);

MonitorRecord monitor_slice(const Slice& s, const FlowRHS& rhs, const FlowSpec& spec, const Frame2* frame = nullptr,
                            Exec ex = Exec::Parallel);

// Spacetime shear 2 G(nabla_Z W, Z), W = d_t + fU, from the closed-form 4D Christoffel symbols.
ComplexField spacetime_shear(const Slice& s, const TensorField& dt_g, const Frame2& fr, Exec ex = Exec::Parallel);

void write_monitors_csv(const std::string& path, const std::vector<MonitorRecord>& m);

enum class TransportQuantity { Sigma, AbsSigmaSq, Rho, ImRho };

struct TransportResult {
    std::vector<double> t;
    std::vector<double> residual;   // max over sampled points per stored slice
    std::vector<double> magnitude;  // max |d/dt Q| over the same points, for scale
    std::size_t points = 0;
    std::size_t masked = 0;         // characteristics that left the chart
};

struct TransportOptions {
    int sample_stride = 2;  // every k-th grid point per axis
    int margin = 4;
    int substeps = 4;       // RK4 substeps per stored interval along characteristics
    const std::vector<char>* mask = nullptr;
};

// Material derivative of Q along d_t + fU (4th-order differences through the stored slices) minus
// the transport right-hand side. Needs slices stored at a uniform interval carrying T and dt_g.
TransportResult transport_check(const Trajectory& traj, const Lapse& lapse, TransportQuantity q,
                                const TransportOptions& opt = {}, Exec ex = Exec::Parallel);

// Pointwise right-hand side of the transport law for q on one slice (frame supplied).
ComplexField transport_rhs(const Slice& s, const Frame2& fr, TransportQuantity q, Exec ex = Exec::Parallel);
ComplexField transport_quantity(const FoliationDiagnostics& d, TransportQuantity q);

// -1/2 T(Z,Z)(rho - 2 U(ln f)) + (1/f) Z(ln f)^2 + curv_R(Z,Z), with dt_g = -2 theta.df + 2T.
ComplexField quad_residual(const Slice& s, const TensorField& T, const Frame2& fr, Exec ex = Exec::Parallel);

struct StationarityReport {
    double grad_ln_f_minus_mu = 0;  // max |grad ln f - nabla_U U|
    double U_f = 0;                 // max |U(f)|
    double ricci_ZZ = 0;            // max |Ricci(Z,Z) - Z(ln f)^2|
    double hessian_ZZ = 0;          // max |nabla d ln f(Z,Z) - 2 Z(ln f)^2|
    bool stationary(double tol) const {
        return grad_ln_f_minus_mu < tol && U_f < tol && ricci_ZZ < tol && hessian_ZZ < tol;
    }
};
StationarityReport stationarity_report(const Slice& s, const Vec3& seed = Vec3(1, 0, 0), const Region& r = {},
                                       Exec ex = Exec::Parallel);

}  // namespace sfr
