#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "sfr/checks.hpp"
#include "sfr/version.hpp"

namespace {

using namespace sfr;

void print_checks(const std::vector<CheckResult>& cs) {
    for (const auto& c : cs)
        std::printf("%s  %-30s %12.4e %s %.3e  %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                    c.at_least ? ">=" : "<=", c.tol, c.note.c_str());
}

int report(const RunReport& r) {
    std::printf("%s %s (%s): %s\n", r.command.c_str(), r.scenario.c_str(), r.kind.c_str(), r.description.c_str());
    for (const auto& [k, v] : r.values) std::printf("      %-30s %12.4e\n", k.c_str(), v);
    print_checks(r.checks);
    if (r.halted) std::printf("halted: %s\n", r.halt_reason.c_str());
    std::printf("output: %s\n", r.out_dir.c_str());
    const int code = r.exit_code();
    if (code == 3)
        for (const auto& c : r.checks)
            if (!c.pass) std::fprintf(stderr, "check failed: %s\n", c.name.c_str());
    if (code == 4) std::fprintf(stderr, "numeric degeneracy: %s\n", r.halt_reason.c_str());
    return code;
}

int exit_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Schema: return 2;
        case ErrorKind::Breach: return 3;
        default: return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sfrlab: ray-congruence flows on structured grids"};
    app.set_version_flag("--version", "sfrlab " + build_string() + " (schema " + std::to_string(kSchemaVersion) + ")");
    app.require_subcommand(1);

    std::string config;
    std::optional<std::string> out;
    double tol_scale = 1.0;
    int refine = -1;
    std::string selector = "all";

    auto common = [&](CLI::App* s, bool needs_config) {
        auto* o = s->add_option("--config", config, "scenario file (INI)");
        if (needs_config) o->required()->check(CLI::ExistingFile);
        s->add_option("--out", out, "output directory (overrides SFRLAB_OUT and the scenario)");
        s->add_option("--tol-scale", tol_scale, "multiply every tolerance")->check(CLI::PositiveNumber);
        s->add_option("--refine", refine, "grid halvings (convergence: number of levels, default 2)")
            ->check(CLI::Range(0, 6));
    };
    auto* run = app.add_subcommand("run", "evolve a scenario and check it");
    common(run, true);
    auto* diag = app.add_subcommand("diagnose", "one-slice diagnostics of the initial datum");
    common(diag, true);
    auto* conv = app.add_subcommand("convergence", "refinement sweep with observed slopes");
    common(conv, true);
    auto* ver = app.add_subcommand("verify-examples", "worked-example suite");
    common(ver, false);
    ver->add_option("selector", selector, "all | " + [] {
        std::string s;
        for (const auto& n : example_names()) s += (s.empty() ? "" : " | ") + n;
        return s;
    }());

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (ver->parsed()) {
            const auto cs = verify_examples(selector, tol_scale, std::max(refine, 0));
            print_checks(cs);
            RunReport r;
            r.command = "verify-examples";
            r.scenario = selector;
            r.kind = "examples";
            r.checks = cs;
            const char* env = std::getenv("SFRLAB_OUT");
            if (out || (env && *env)) {
                const std::filesystem::path dir = std::filesystem::path(out ? *out : env) / ("examples-" + selector);
                std::filesystem::create_directories(dir);
                write_summary_json((dir / "summary.json").string(), r);
            }
            for (const auto& c : cs)
                if (!c.pass) std::fprintf(stderr, "check failed: %s\n", c.name.c_str());
            return r.exit_code();
        }
        Scenario sc = load_scenario(config);
        scale_tolerances(sc, tol_scale);
        const std::string dir = resolve_out_dir(sc, out);
        if (conv->parsed()) return report(convergence_study(sc, refine < 0 ? 2 : refine, dir));
        if (refine > 0) sc = refined(sc, refine);
        if (diag->parsed()) return report(diagnose_scenario(sc, dir));
        return report(run_scenario(sc, dir));
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
