#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sfr/presets.hpp"
#include "sfr/scenario.hpp"

namespace sfr {

struct CheckResult {
    std::string name;
    double value = 0;
    double tol = 0;
    bool at_least = false;  // pass when value >= tol instead of value <= tol
    bool pass = false;
    std::string note;
};
CheckResult make_check(std::string name, double value, double tol, std::string note = {}, bool at_least = false);

struct RunReport {
    std::string command;  // run | diagnose | convergence
    std::string scenario;
    std::string kind;
    std::string description;
    std::string out_dir;
    std::vector<CheckResult> checks;
    std::vector<std::pair<std::string, double>> values;  // informational
    std::vector<std::string> files;
    bool halted = false;
    bool degenerate = false;  // halted by a numeric degeneracy rather than a monitor breach
    std::string halt_reason;

    bool all_pass() const;
    int exit_code() const;  // 0, 3 (breach or failed check) or 4 (degeneracy)
};

// Executes the scenario and writes monitors.csv, slice snapshots (or reduced_*.csv) and summary.json
// into out_dir/<name>.
RunReport run_scenario(const Scenario& sc, const std::string& out_dir, Exec ex = Exec::Parallel);
// One-slice diagnostics of the initial datum.
RunReport diagnose_scenario(const Scenario& sc, const std::string& out_dir, Exec ex = Exec::Parallel);
// Runs refinement levels 0..levels and reports the error (closed form when known, else successive
// differences on the shared nodes) with observed slopes; passes when the last slope is >= min_slope.
RunReport convergence_study(const Scenario& sc, int levels, const std::string& out_dir, double min_slope = 1.9,
                            Exec ex = Exec::Parallel);

void write_summary_json(const std::string& path, const RunReport& r);

// Worked examples: circle, ex-flat, s3-hopf, s3-kl, radial, charge, massless (or all).
std::vector<std::string> example_names();
std::vector<CheckResult> verify_examples(const std::string& selector, double tol_scale = 1.0, int refine = 0,
                                         Exec ex = Exec::Parallel);

}  // namespace sfr
