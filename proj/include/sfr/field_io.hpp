#pragma once

#include <map>
#include <string>
#include <vector>

#include "sfr/grid.hpp"

namespace sfr {

// Columnar snapshot: one row per grid point, coordinates first, then named
// real components. Complex values are stored as <name>.re / <name>.im pairs.
struct Snapshot {
    ChartGrid grid;
    double t = 0.0;
    std::string kind;  // free-form tag, e.g. "state" or "diagnostics"
    std::map<std::string, std::string> meta;  // extra header entries (build string, scenario name)
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    void add(const std::string& name, const ScalarField& f);
    void add(const std::string& name, const ComplexField& f);
    void add(const std::string& name, const VectorField& f);
    void add_sym(const std::string& name, const TensorField& f);  // 6 upper-triangular components

    const std::vector<double>& column(const std::string& name) const;
    ScalarField scalar(const std::string& name) const;
    ComplexField complex(const std::string& name) const;
    VectorField vector(const std::string& name) const;
    TensorField sym(const std::string& name) const;
};

// Writes <prefix>.json (header) and <prefix>.csv (data). Doubles are written in
// shortest round-trip form, so read_snapshot reproduces every value bit-exactly.
void write_snapshot(const std::string& prefix, const Snapshot& s);
Snapshot read_snapshot(const std::string& prefix);

std::string format_double(double x);

}  // namespace sfr
