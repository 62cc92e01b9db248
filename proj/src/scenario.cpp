#include "sfr/scenario.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "sfr/presets.hpp"
#include "sfr/version.hpp"

#ifndef SFR_BUILD_STRING
#define SFR_BUILD_STRING "unknown"
#endif

namespace sfr {

std::string build_string() { return SFR_BUILD_STRING; }

std::string to_string(InitialKind k) {
    switch (k) {
        case InitialKind::Preset: return "preset";
        case InitialKind::Kerr: return "kerr";
        case InitialKind::Fields: return "fields";
        case InitialKind::Reduced: return "reduced";
    }
    return "?";
}

namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"scenario", {"name", "out", "seed"}},
        {"grid", {"x0", "x1", "x2"}},
        {"initial", {"kind", "preset", "t0", "fields"}},
        {"kerr", {"terms", "form", "seed"}},
        {"reduced", {"model", "k", "l", "eps", "n", "b", "c", "r_min", "r_max", "r0", "m0", "crosscheck",
                     "crosscheck_n"}},
        {"flow", {"variant", "dt", "t_end", "store_every", "monitor_every", "margin", "halt_on_breach", "frame_seed",
                  "nu_min", "max_sweeps", "shear4"}},
        {"tolerances", {"unit", "ray", "geodesic", "sfr_identity", "sigma", "im_rho", "nu_ratio"}},
        {"checks", {"closed_form", "stationary", "level_set", "sigma", "reduced"}},
        {"diagnostics", {"foliation", "stationarity", "snapshots", "margin"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
    throw SchemaError("scenario: " + key + ": " + what);
}

double to_double(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "off") return kOff;
    double x = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) bad(key, "expected a number, got '" + v + "'");
    if (!std::isfinite(x)) bad(key, "must be finite");
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    long long x = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) bad(key, "expected an integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    bad(key, "expected true or false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
    const auto w = words(v);
    if (w.size() != 3) bad(key, "expected three numbers");
    return {to_double(key, w[0]), to_double(key, w[1]), to_double(key, w[2])};
}

cplx to_cplx(const std::string& key, const std::string& v) {
    const auto w = words(v);
    if (w.size() != 2) bad(key, "expected 're im'");
    return {to_double(key, w[0]), to_double(key, w[1])};
}

// "c_re c_im i j k; ..." for sum c a0^i a1^j a2^k
std::vector<twistor::KerrTerm> to_terms(const std::string& key, const std::string& v) {
    std::vector<twistor::KerrTerm> out;
    std::istringstream is(v);
    for (std::string item; std::getline(is, item, ';');) {
        if (trim(item).empty()) continue;
        const auto w = words(item);
        if (w.size() != 5) bad(key, "each term is 'c_re c_im i j k'");
        twistor::KerrTerm t{cplx(to_double(key, w[0]), to_double(key, w[1])), int(to_int(key, w[2])),
                            int(to_int(key, w[3])), int(to_int(key, w[4]))};
        if (t.i < 0 || t.j < 0 || t.k < 0) bad(key, "exponents must be >= 0");
        out.push_back(t);
    }
    return out;
}

double positive(const std::string& key, double x) {
    if (!(x > 0)) bad(key, "must be > 0");
    return x;
}

}  // namespace

Axis parse_axis(const std::string& s) {
    const auto w = words(s);
    if (w.size() != 3 && !(w.size() == 4 && w[3] == "periodic")) bad("grid", "axis is 'min max n [periodic]', got '" + s + "'");
    Axis a;
    a.min = to_double("grid", w[0]);
    a.max = to_double("grid", w[1]);
    a.n = int(to_int("grid", w[2]));
    a.periodic = w.size() == 4;
    if (!(a.min < a.max)) bad("grid", "axis needs min < max");
    if (a.n < 5) bad("grid", "axis needs n >= 5");
    return a;
}

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
    for (const auto& [sec, body] : tree) {
        const auto it = schema().find(sec);
        if (it == schema().end()) bad(sec, "unknown section");
        if (body.empty() && !body.data().empty()) bad(sec, "top-level keys are not allowed");
        for (const auto& [key, _] : body)
            if (!it->second.count(key)) bad(sec + "." + key, "unknown key");
    }
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return trim(*v);
        return std::nullopt;
    };

    Scenario sc;
    if (auto v = get("scenario.name"); v && !v->empty()) sc.name = *v;
    else bad("scenario.name", "required");
    for (char ch : sc.name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_')) bad("scenario.name", "use [A-Za-z0-9_-]");
    if (auto v = get("scenario.out")) sc.out = *v;
    if (auto v = get("scenario.seed")) {
        const long long s = to_int("scenario.seed", *v);
        if (s < 0) bad("scenario.seed", "must be >= 0");
        sc.seed = static_cast<std::uint64_t>(s);
    }

    const auto gx = get("grid.x0"), gy = get("grid.x1"), gz = get("grid.x2");
    if (gx || gy || gz) {
        if (!(gx && gy && gz)) bad("grid", "give all of x0, x1, x2");
        sc.axes = std::array<Axis, 3>{parse_axis(*gx), parse_axis(*gy), parse_axis(*gz)};
    }

    const auto kind = get("initial.kind");
    if (!kind) bad("initial.kind", "required");
    if (*kind == "preset") sc.kind = InitialKind::Preset;
    else if (*kind == "kerr") sc.kind = InitialKind::Kerr;
    else if (*kind == "fields") sc.kind = InitialKind::Fields;
    else if (*kind == "reduced") sc.kind = InitialKind::Reduced;
    else bad("initial.kind", "expected preset, kerr, fields or reduced");
    if (auto v = get("initial.t0")) sc.t0 = to_double("initial.t0", *v);

    switch (sc.kind) {
        case InitialKind::Preset: {
            const auto p = get("initial.preset");
            if (!p) bad("initial.preset", "required for kind = preset");
            const auto names = preset_names();
            if (std::find(names.begin(), names.end(), *p) == names.end()) bad("initial.preset", "unknown preset '" + *p + "'");
            sc.preset = *p;
            break;
        }
        case InitialKind::Kerr: {
            const auto t = get("kerr.terms");
            if (!t) bad("kerr.terms", "required for kind = kerr");
            sc.kerr.terms = to_terms("kerr.terms", *t);
            if (auto f = get("kerr.form")) {
                if (*f == "default") sc.kerr.form = twistor::KerrForm::Default;
                else if (*f == "printed") sc.kerr.form = twistor::KerrForm::Printed;
                else bad("kerr.form", "expected default or printed");
            }
            if (sc.kerr.form == twistor::KerrForm::Printed)
                bad("kerr.form", "the printed form yields z, not mu; run it through verify-examples instead");
            if (auto s = get("kerr.seed")) sc.kerr_seed = to_cplx("kerr.seed", *s);
            sc.kerr.validate();
            if (!sc.axes) bad("grid", "required for kind = kerr");
            break;
        }
        case InitialKind::Fields: {
            const auto f = get("initial.fields");
            if (!f) bad("initial.fields", "required for kind = fields");
            fs::path p(*f);
            if (p.is_relative()) p = fs::path(base_dir) / p;
            for (const char* ext : {".json", ".csv"})
                if (!fs::exists(p.string() + ext)) bad("initial.fields", "missing file " + p.string() + ext);
            sc.fields = p.string();
            break;
        }
        case InitialKind::Reduced: {
            auto& r = sc.reduced;
            if (auto v = get("reduced.model")) r.model = parse_reduced_model(*v);
            if (auto v = get("reduced.k")) r.k = int(to_int("reduced.k", *v));
            if (auto v = get("reduced.l")) r.l = int(to_int("reduced.l", *v));
            if (r.k == 0 || r.l == 0) bad("reduced.k/l", "must be nonzero");
            if (auto v = get("reduced.eps")) r.eps = to_double("reduced.eps", *v);
            if (!(r.eps >= 0 && r.eps < std::numbers::pi / 4)) bad("reduced.eps", "must lie in [0, pi/4)");
            if (auto v = get("reduced.n")) r.n = int(to_int("reduced.n", *v));
            if (r.n < 5) bad("reduced.n", "must be >= 5");
            if (auto v = get("reduced.b")) r.b = *v;
            if (r.b != "r" && r.b != "r+c" && r.b != "r^2") bad("reduced.b", "expected r, r+c or r^2");
            if (auto v = get("reduced.c")) r.c = to_double("reduced.c", *v);
            if (auto v = get("reduced.r_min")) r.r_min = to_double("reduced.r_min", *v);
            if (auto v = get("reduced.r_max")) r.r_max = to_double("reduced.r_max", *v);
            if (!(r.r_min < r.r_max)) bad("reduced.r_min", "needs r_min < r_max");
            if (auto v = get("reduced.r0")) r.boundary.r0 = to_double("reduced.r0", *v);
            if (auto v = get("reduced.m0")) r.boundary.m0 = to_double("reduced.m0", *v);
            if (auto v = get("reduced.crosscheck")) r.crosscheck = to_bool("reduced.crosscheck", *v);
            if (auto v = get("reduced.crosscheck_n")) r.crosscheck_n = int(to_int("reduced.crosscheck_n", *v));
            if (r.crosscheck_n < 5) bad("reduced.crosscheck_n", "must be >= 5");
            break;
        }
    }

    FlowSpec& f = sc.flow;
    if (auto v = get("flow.variant")) {
        f.variant = parse_variant(*v);
        sc.flow_variant_set = true;
        if (f.variant == FlowVariant::Custom) bad("flow.variant", "Custom needs a tensor T and is only available through presets");
    }
    if (auto v = get("flow.dt")) f.dt = to_double("flow.dt", *v);
    if (auto v = get("flow.t_end")) f.t_end = to_double("flow.t_end", *v);
    if (auto v = get("flow.store_every")) f.store_every = int(to_int("flow.store_every", *v));
    if (auto v = get("flow.monitor_every")) f.monitor_every = int(to_int("flow.monitor_every", *v));
    if (auto v = get("flow.margin")) f.margin = int(to_int("flow.margin", *v));
    if (auto v = get("flow.halt_on_breach")) f.halt_on_breach = to_bool("flow.halt_on_breach", *v);
    if (auto v = get("flow.frame_seed")) f.frame_seed = to_vec3("flow.frame_seed", *v);
    if (auto v = get("flow.nu_min")) f.integrable.nu_min = positive("flow.nu_min", to_double("flow.nu_min", *v));
    if (auto v = get("flow.max_sweeps")) f.integrable.max_sweeps = int(to_int("flow.max_sweeps", *v));
    if (auto v = get("flow.shear4")) f.shear4 = to_bool("flow.shear4", *v);
    if (f.margin < 0) bad("flow.margin", "must be >= 0");
    if (f.frame_seed.norm() == 0) bad("flow.frame_seed", "must be nonzero");
    f.validate();

    auto tol = [&](const std::string& key, double& dst) {
        if (auto v = get(key)) dst = positive(key, to_double(key, *v));
    };
    tol("tolerances.unit", f.tol.unit);
    tol("tolerances.ray", f.tol.ray);
    tol("tolerances.geodesic", f.tol.geodesic);
    tol("tolerances.sfr_identity", f.tol.sfr_identity);
    tol("tolerances.sigma", f.tol.sigma);
    tol("tolerances.im_rho", f.tol.im_rho);
    if (auto v = get("tolerances.nu_ratio")) {
        f.tol.nu_ratio = to_double("tolerances.nu_ratio", *v);
        if (!(f.tol.nu_ratio >= 0 && f.tol.nu_ratio <= 1)) bad("tolerances.nu_ratio", "must lie in [0, 1]");
    }
    tol("checks.closed_form", sc.checks.closed_form);
    tol("checks.stationary", sc.checks.stationary);
    tol("checks.level_set", sc.checks.level_set);
    tol("checks.sigma", sc.checks.sigma);
    tol("checks.reduced", sc.checks.reduced);

    if (auto v = get("diagnostics.foliation")) sc.diag.foliation = to_bool("diagnostics.foliation", *v);
    if (auto v = get("diagnostics.stationarity")) sc.diag.stationarity = to_bool("diagnostics.stationarity", *v);
    if (auto v = get("diagnostics.snapshots")) sc.diag.snapshots = to_bool("diagnostics.snapshots", *v);
    if (auto v = get("diagnostics.margin")) sc.diag.margin = int(to_int("diagnostics.margin", *v));
    if (sc.diag.margin < 0) bad("diagnostics.margin", "must be >= 0");
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw SchemaError("scenario: cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    const fs::path p(path);
    Scenario sc = parse_scenario(ss.str(), p.has_parent_path() ? p.parent_path().string() : ".");
    sc.path = path;
    return sc;
}

void scale_tolerances(Scenario& sc, double s) {
    if (!(s > 0) || !std::isfinite(s)) throw SchemaError("tolerance scale must be > 0");
    for (double* t : {&sc.flow.tol.unit, &sc.flow.tol.ray, &sc.flow.tol.geodesic, &sc.flow.tol.sfr_identity,
                      &sc.flow.tol.sigma, &sc.flow.tol.im_rho, &sc.checks.closed_form, &sc.checks.stationary,
                      &sc.checks.level_set, &sc.checks.sigma, &sc.checks.reduced})
        if (std::isfinite(*t)) *t *= s;
}

Scenario refined(const Scenario& sc, int levels) {
    if (levels < 0) throw SchemaError("refinement level must be >= 0");
    Scenario r = sc;
    const int m = 1 << levels;
    r.refine += levels;
    r.flow.dt /= m;
    r.flow.store_every *= m;
    r.flow.monitor_every *= m;
    r.reduced.n = (sc.reduced.n - 1) * m + 1;
    r.reduced.crosscheck_n = (sc.reduced.crosscheck_n - 1) * m + 1;
    return r;
}

std::string resolve_out_dir(const Scenario& sc, const std::optional<std::string>& cli_out) {
    if (cli_out) return *cli_out;
    if (const char* e = std::getenv("SFRLAB_OUT"); e && *e) return e;
    return sc.out;
}

}  // namespace sfr
