#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfr/flows.hpp"
#include "sfr/reduced_models.hpp"
#include "sfr/twistor_flat.hpp"

namespace sfr {

enum class InitialKind { Preset, Kerr, Fields, Reduced };
std::string to_string(InitialKind k);

// Tolerances of the scenario checks (the flow monitors have their own in FlowSpec::tol).
struct CheckTolerances {
    double closed_form = 1e-4;   // evolved U against a closed-form U_t
    double stationary = 1e-12;   // drift of a stationary datum
    double level_set = 1e-4;     // d phi_t(U_t) for closed-form fibres
    double sigma = 1e-4;         // max |sigma| on the final slice (kOff disables)
    double reduced = 1e-6;       // reduced-vs-full discrepancy, S^3 norm defect per unit time
};

struct DiagnosticsToggles {
    bool foliation = true;      // sigma, rho, nu on stored slices
    bool stationarity = false;  // Case-1 stationarity report on the initial slice
    bool snapshots = true;      // state snapshots of stored slices
    int margin = 2;
};

struct ReducedScenario {
    ReducedModel model = ReducedModel::S3;
    int k = 1, l = 2;
    double eps = 0.2;
    int n = 65;
    std::string b = "r";  // r | r+c | r^2
    double c = 0.0;
    double r_min = 1.0, r_max = 2.0;
    RadialBoundary boundary;
    bool crosscheck = false;
    int crosscheck_n = 17;
};

struct Scenario {
    std::string name;
    std::string path;  // file the scenario was read from
    InitialKind kind = InitialKind::Preset;
    std::string preset;
    std::optional<std::array<Axis, 3>> axes;  // preset default when empty
    double t0 = 0.0;
    twistor::KerrFunction kerr;
    cplx kerr_seed{0.0};
    std::string fields;  // snapshot prefix holding g (sym) and U (vector)
    ReducedScenario reduced;
    FlowSpec flow;
    bool flow_variant_set = false;
    CheckTolerances checks;
    DiagnosticsToggles diag;
    std::string out = "sfrlab_out";
    std::uint64_t seed = 1;
    int refine = 0;  // halvings of the grid spacing, applied when the initial slice is built
};

// Flat INI sections [scenario] [grid] [initial] [kerr] [reduced] [flow] [tolerances] [checks]
// [diagnostics]. Unknown sections or keys, bad values and missing referenced files throw SchemaError.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

// Multiplies every finite tolerance (monitors and checks) by s > 0.
void scale_tolerances(Scenario& sc, double s);

// Halves the grid spacing and the time step `levels` times (reduced models: doubles the intervals).
Scenario refined(const Scenario& sc, int levels);

// Output directory: command line, then SFRLAB_OUT, then the scenario.
std::string resolve_out_dir(const Scenario& sc, const std::optional<std::string>& cli_out);

// Axis syntax used by [grid]: "min max n" with an optional trailing "periodic".
Axis parse_axis(const std::string& s);

}  // namespace sfr
