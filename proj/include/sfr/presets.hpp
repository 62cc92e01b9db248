#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sfr/scenario.hpp"

namespace sfr {

// Initial slice and flow for a 3D scenario, with whatever closed-form knowledge the datum carries.
struct PreparedRun {
    Slice initial;
    FlowSpec flow;
    std::string description;
    bool stationary = false;  // exact fixed point of the discrete flow
    // U at time t on the grid (closed form or an independent solve); empty when unknown
    std::function<VectorField(double)> exact_U;
    // complex function whose level sets at time t contain the fibres, and where that holds
    std::function<CVec3(double, const Vec3&)> fibre_gradient;
    std::function<bool(double, const Vec3&)> fibre_domain;
    std::vector<char> mask;  // points where the initial datum is defined (all when empty)
};

std::vector<std::string> preset_names();
std::string preset_description(const std::string& name);

// Preset, Kerr and Fields scenarios; throws SchemaError for Reduced.
PreparedRun prepare_run(const Scenario& sc, Exec ex = Exec::Parallel);

Axis refine_axis(const Axis& a, int levels);

// Unit fields shared by presets and example checks.
Vec3 circle_direction(const Vec3& x);                  // (-x2, x1, 0)/rho
cplx circle_phi(double t, const Vec3& x);              // i x3 + r - t arg((r - i t)/(x1 - i x2)), r^2 = rho^2 - t^2
CVec3 circle_phi_gradient(double t, const Vec3& x);    // analytic d phi_t

}  // namespace sfr
