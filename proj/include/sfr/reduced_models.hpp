#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfr/flows.hpp"

namespace sfr {

// 1D node grid for the reduced solvers (non-periodic, n >= 5).
Axis line_axis(double min, double max, int n);

// ---- S^3 (k, l) system: U = u d_s + v d_a + w d_b on ds^2 + cos^2 s da^2 + sin^2 s db^2 ----

struct S3State {
    Axis s;
    std::vector<double> u, v, w;
    int k = 1, l = 1;
};

// s in [eps, pi/2 - eps]
Axis s3_axis(double eps, int n);
S3State s3_initial(int k, int l, const Axis& s);  // throws DomainError for k or l zero

struct S3Rates {
    std::vector<double> du, dv, dw;
};
// Nodes with s within 1e-12 of 0 or pi/2 use the one-sided limits u cot s -> u'(0), u tan s -> -u'(pi/2);
// they need u = 0 there (DegeneracyError otherwise).
S3Rates s3_rhs(const S3State& st);

// max |u^2 + v^2 cos^2 s + w^2 sin^2 s - 1|
double s3_norm_defect(const S3State& st);

struct S3Trajectory {
    std::vector<double> t;
    std::vector<S3State> states;
    std::vector<double> norm_defect;  // per stored state
};
S3Trajectory s3_evolve(const S3State& st, double dt, double t_end, int store_every = 1);

// ---- radial metric a^2 dr^2 + b^2 g_{S^2}, gauge a = 1 ----

struct RadialState {
    Axis r;
    std::vector<double> a, b;
    bool unit_gauge = true;
};
RadialState radial_state(const Axis& r, const std::function<double(double)>& b);

struct RadialBoundary {
    std::optional<double> r0;  // a node of the r grid; r.min when empty
    double m0 = 0.0;           // d_t b at r0
};

// m = d_t b from b m' - m b' = 1 - (b b')', i.e. (m/b)' = (1 - (b b')')/b^2, by 4th-order cumulative
// quadrature from r0. Throws DomainError without the gauge flag and DegeneracyError when b is near 0.
std::vector<double> radial_rhs(const RadialState& st, const RadialBoundary& bc = {});

struct RadialTrajectory {
    std::vector<double> t;
    std::vector<RadialState> states;
};
RadialTrajectory radial_evolve(const RadialState& st, const RadialBoundary& bc, double dt, double t_end,
                               int store_every = 1);

// ---- reduced vs full ----

enum class ReducedModel { S3, Radial };
std::string to_string(ReducedModel m);
ReducedModel parse_reduced_model(const std::string& s);  // throws SchemaError

struct CrosscheckSpec {
    ReducedModel model = ReducedModel::S3;
    int k = 1, l = 2;
    double eps = 0.2;
    std::function<double(double)> b = [](double r) { return r; };
    double r_min = 1.0, r_max = 2.0;
    double t_end = 0.1;
    double courant = 0.25;  // dt = courant * h
};

struct CrosscheckReport {
    ReducedModel model = ReducedModel::S3;
    int resolution = 0;
    double dt = 0;
    double t_end = 0;
    double discrepancy = 0;     // max over reduced nodes (margin 2) at t_end; radial: on |s - pi/2| <= pi/6
    double reduced_change = 0;  // max |state(t_end) - state(0)|
    double full_change = 0;
    bool halted = false;
    std::string halt_reason;
};

// Embeds the reduced state in a 3D chart ((s, a, b) for S^3 with the Custom flow T = 0, f = 1;
// (r, s, theta) for the radial model with IntegrableCFGR) and evolves both to t_end on the same
// node set and time step.
CrosscheckReport reduced_vs_full_crosscheck(const CrosscheckSpec& spec, int resolution, Exec ex = Exec::Parallel);

}  // namespace sfr
