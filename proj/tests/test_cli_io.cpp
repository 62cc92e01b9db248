#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "sfr/checks.hpp"
#include "sfr/field_io.hpp"
#include "sfr/version.hpp"
#include "testing.hpp"

using namespace sfr;
namespace fs = std::filesystem;

namespace {

const std::string kExe = SFRLAB_EXE;
const std::string kScenarios = SFR_SCENARIO_DIR;

fs::path scratch(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("sfrlab_test_" + std::to_string(::getpid())) / tag;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int sh(const std::string& cmd) {
    const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const std::string kMinimal = R"(
[scenario]
name = t1

[initial]
kind = preset
preset = flat-d1
)";

Scenario parse_with(const std::string& extra) { return parse_scenario(kMinimal + extra); }

}  // namespace

TEST_CASE("minimal scenario takes the documented defaults") {
    const Scenario sc = parse_scenario(kMinimal);
    CHECK(sc.name == "t1");
    CHECK(sc.kind == InitialKind::Preset);
    CHECK(sc.preset == "flat-d1");
    CHECK_FALSE(sc.axes);
    CHECK_FALSE(sc.flow_variant_set);
    CHECK(sc.flow.dt == 1e-3);
    CHECK(sc.flow.t_end == 0.1);
    CHECK(sc.flow.tol.unit == 1e-6);
    CHECK(sc.flow.tol.sigma == kOff);
    CHECK(sc.checks.stationary == 1e-12);
    CHECK(sc.out == "sfrlab_out");
    CHECK(sc.seed == 1);
}

TEST_CASE("typed keys parse") {
    const Scenario sc = parse_with(R"(
[grid]
x0 = 0 1 9
x1 = -1 1 9
x2 = 0 6.25 8 periodic

[flow]
variant = sfr
dt = 2.5e-3
frame_seed = 0 1 0
halt_on_breach = false

[tolerances]
unit = 1e-9
ray = off

[diagnostics]
foliation = no
margin = 3
)");
    REQUIRE(sc.axes);
    CHECK((*sc.axes)[1].min == -1);
    CHECK((*sc.axes)[2].periodic);
    CHECK((*sc.axes)[2].n == 8);
    CHECK(sc.flow.variant == FlowVariant::SFR);
    CHECK(sc.flow_variant_set);
    CHECK(sc.flow.dt == 2.5e-3);
    CHECK(sc.flow.frame_seed == Vec3(0, 1, 0));
    CHECK_FALSE(sc.flow.halt_on_breach);
    CHECK(sc.flow.tol.unit == 1e-9);
    CHECK(sc.flow.tol.ray == kOff);
    CHECK_FALSE(sc.diag.foliation);
    CHECK(sc.diag.margin == 3);
}

TEST_CASE("schema violations are rejected before any compute") {
    const std::vector<std::string> bad = {
        "[extra]\nx = 1\n",
        "[flow]\ndtt = 0.1\n",
        "[flow]\ndt = 0\n",
        "[flow]\ndt = -1e-3\n",
        "[flow]\ndt = 1e-3x\n",
        "[flow]\nvariant = custom\n",
        "[flow]\nvariant = nonsense\n",
        "[flow]\nhalt_on_breach = maybe\n",
        "[flow]\nframe_seed = 0 0 0\n",
        "[grid]\nx0 = 0 1 9\n",
        "[grid]\nx0 = 0 1 3\nx1 = 0 1 9\nx2 = 0 1 9\n",
        "[grid]\nx0 = 1 0 9\nx1 = 0 1 9\nx2 = 0 1 9\n",
        "[tolerances]\nunit = -1\n",
        "[tolerances]\nnu_ratio = 2\n",
        "[diagnostics]\nmargin = -1\n",
    };
    for (const auto& b : bad) {
        CAPTURE(b);
        CHECK_THROWS_AS(parse_with(b), SchemaError);
    }
    CHECK_THROWS_AS(parse_scenario("[initial]\nkind = preset\npreset = flat-d1\n"), SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a b\n[initial]\nkind = preset\npreset = flat-d1\n"), SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[initial]\nkind = preset\npreset = nope\n"), SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[initial]\nkind = kerr\n[kerr]\nterms = 1 0 0 1 0\n"),
                    SchemaError);  // no grid
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[grid]\nx0 = 0 1 9\nx1 = 0 1 9\nx2 = 0 1 9\n"
                                   "[initial]\nkind = kerr\n[kerr]\nterms = 1 0 0 1 0\nform = printed\n"),
                    SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[initial]\nkind = fields\nfields = /nonexistent/x\n"),
                    SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[initial]\nkind = reduced\n[reduced]\nk = 0\n"), SchemaError);
    CHECK_THROWS_AS(parse_scenario("[scenario]\nname = a\n[initial]\nkind = reduced\n[reduced]\neps = 0.8\n"),
                    SchemaError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.ini"), SchemaError);
}

TEST_CASE("axis strings round-trip (random)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Axis a;
        a.min = testing::uniform(rng, -10, 10);
        a.max = a.min + testing::uniform(rng, 0.01, 10);
        a.n = 5 + static_cast<int>(rng() % 60);
        a.periodic = rng() % 2;
        const std::string s = format_double(a.min) + " " + format_double(a.max) + " " + std::to_string(a.n) +
                              (a.periodic ? " periodic" : "");
        const Axis b = parse_axis(s);
        CHECK(b.min == a.min);
        CHECK(b.max == a.max);
        CHECK(b.n == a.n);
        CHECK(b.periodic == a.periodic);
    }
}

TEST_CASE("refinement halves steps and keeps nodes nested (random)") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Scenario sc = parse_scenario(kMinimal);
        sc.flow.dt = testing::uniform(rng, 1e-4, 1e-2);
        sc.flow.store_every = 1 + static_cast<int>(rng() % 10);
        sc.reduced.n = 5 + static_cast<int>(rng() % 50);
        const int L = static_cast<int>(rng() % 4);
        const Scenario r = refined(sc, L);
        CHECK(r.refine == L);
        CHECK(r.flow.dt * (1 << L) == doctest::Approx(sc.flow.dt).epsilon(1e-15));
        CHECK(r.flow.store_every == sc.flow.store_every << L);
        CHECK(r.reduced.n - 1 == (sc.reduced.n - 1) << L);
        // refined axes contain every coarse node
        const Axis a{0.0, 1.0, sc.reduced.n, false};
        const Axis f = refine_axis(a, L);
        CHECK(f.n == r.reduced.n);
        for (int i = 0; i < a.n; ++i) CHECK(f.coord(i << L) == doctest::Approx(a.coord(i)).epsilon(1e-14));
        const Axis ap{0.0, 2.0, 8, true};
        CHECK(refine_axis(ap, L).n == 8 << L);
    }
    CHECK_THROWS_AS(refined(parse_scenario(kMinimal), -1), SchemaError);
}

TEST_CASE("tolerance scaling leaves disabled checks off") {
    Scenario sc = parse_with("[tolerances]\nray = off\n");
    scale_tolerances(sc, 10.0);
    CHECK(sc.flow.tol.unit == doctest::Approx(1e-5));
    CHECK(sc.flow.tol.ray == kOff);
    CHECK(sc.checks.stationary == doctest::Approx(1e-11));
    CHECK(sc.flow.tol.nu_ratio == 0.5);  // a ratio, not a tolerance
    CHECK_THROWS_AS(scale_tolerances(sc, 0.0), SchemaError);
}

TEST_CASE("output directory precedence: --out, then SFRLAB_OUT, then the scenario") {
    Scenario sc = parse_scenario(kMinimal);
    sc.out = "from_file";
    ::unsetenv("SFRLAB_OUT");
    CHECK(resolve_out_dir(sc, std::nullopt) == "from_file");
    ::setenv("SFRLAB_OUT", "from_env", 1);
    CHECK(resolve_out_dir(sc, std::nullopt) == "from_env");
    CHECK(resolve_out_dir(sc, std::string("from_cli")) == "from_cli");
    ::unsetenv("SFRLAB_OUT");
}

TEST_CASE("checks and exit codes") {
    CHECK(make_check("a", 1e-7, 1e-6).pass);
    CHECK_FALSE(make_check("a", 1e-5, 1e-6).pass);
    CHECK(make_check("a", 2.5, 1.9, "", true).pass);
    CHECK_FALSE(make_check("a", 1.5, 1.9, "", true).pass);
    CHECK_FALSE(make_check("a", std::nan(""), 1.0).pass);
    RunReport r;
    r.checks.push_back(make_check("a", 0, 1));
    CHECK(r.exit_code() == 0);
    r.checks.push_back(make_check("b", 2, 1));
    CHECK(r.exit_code() == 3);
    r.degenerate = true;
    CHECK(r.exit_code() == 4);
}

TEST_CASE("run writes monitors, snapshots and a summary with version and build") {
    const fs::path out = scratch("lib_run");
    Scenario sc = parse_with("[flow]\ndt = 0.01\nt_end = 0.05\nstore_every = 5\n");
    const RunReport r = run_scenario(sc, out.string(), Exec::Serial);
    CHECK(r.exit_code() == 0);
    const fs::path dir = out / "t1";
    REQUIRE(fs::exists(dir / "monitors.csv"));
    REQUIRE(fs::exists(dir / "slice_0000.csv"));
    REQUIRE(fs::exists(dir / "slice_0001.json"));
    REQUIRE(fs::exists(dir / "summary.json"));
    const std::string header = "# schema_version=" + std::to_string(kSchemaVersion);
    for (const auto& e : fs::directory_iterator(dir)) {
        CAPTURE(e.path());
        const std::string text = slurp(e.path());
        if (e.path().extension() == ".csv") {
            CHECK(text.rfind(header, 0) == 0);
            CHECK(text.find("build=" + build_string()) != std::string::npos);
        } else {
            const auto j = nlohmann::json::parse(text);
            CHECK(j.at("schema_version") == kSchemaVersion);
            const auto build = j.contains("build") ? j.at("build") : j.at("meta").at("build");
            CHECK(build == build_string());
        }
    }
    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j.at("exit_code") == 0);
    bool drift = false;
    for (const auto& c : j.at("checks")) drift |= c.at("name") == "stationary_drift" && c.at("pass") == true;
    CHECK(drift);
    // the stored snapshot reads back
    const Snapshot s = read_snapshot((dir / "slice_0001").string());
    CHECK(s.t == doctest::Approx(0.05));
    CHECK((s.vector("U")[0] - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("fields scenario runs from a stored snapshot") {
    const fs::path dir = scratch("fields");
    const ChartGrid g = make_box(0, 1, 9);
    Snapshot s;
    s.grid = g;
    s.kind = "state";
    s.add_sym("g", TensorField(g, Mat3::Identity()));
    s.add("U", VectorField(g, Vec3(0, 0, 1)));
    write_snapshot((dir / "init").string(), s);
    std::ofstream(dir / "fields.ini") << "[scenario]\nname = fromfile\n[initial]\nkind = fields\nfields = init\n"
                                         "[flow]\ndt = 0.01\nt_end = 0.03\n";
    const Scenario sc = load_scenario((dir / "fields.ini").string());
    CHECK(sc.fields == (dir / "init").string());
    const RunReport r = run_scenario(sc, (dir / "out").string(), Exec::Serial);
    CHECK(r.exit_code() == 0);
    CHECK_THROWS_AS(prepare_run(refined(sc, 1)), SchemaError);
}

TEST_CASE("sfrlab run: exit codes") {
    const fs::path out = scratch("exe_run");
    const std::string o = " --out " + out.string();
    CHECK(sh(kExe + " run --config " + kScenarios + "/stationary.ini" + o) == 0);
    CHECK(sh(kExe + " run --config " + kScenarios + "/ex-flat.ini" + o) == 0);
    CHECK(sh(kExe + " run --config " + kScenarios + "/bad-dt.ini" + o) == 2);
    CHECK(sh(kExe + " run --config /nonexistent.ini" + o) == 2);
    CHECK(sh(kExe + " run" + o) == 2);
    CHECK(sh(kExe + " frobnicate") == 2);

    // ex-flat summary reproduces the closed-form checks
    const auto j = nlohmann::json::parse(slurp(out / "ex-flat" / "summary.json"));
    std::set<std::string> passed;
    for (const auto& c : j.at("checks"))
        if (c.at("pass") == true) passed.insert(c.at("name").get<std::string>());
    CHECK(passed.count("closed_form_U"));
    CHECK(passed.count("fibre_level_sets"));

    // a monitor breach exits 3
    const fs::path breach = out / "breach.ini";
    std::ofstream(breach) << "[scenario]\nname = breach\n[initial]\nkind = preset\npreset = random-sfr\n"
                          << "[flow]\ndt = 0.01\nt_end = 0.02\n[tolerances]\nunit = 1e-300\n";
    CHECK(sh(kExe + " run --config " + breach.string() + o) == 3);
    const auto jb = nlohmann::json::parse(slurp(out / "breach" / "summary.json"));
    CHECK(jb.at("halted") == true);

    // a Kerr datum with v = t - x1 = 0 inside the grid is a numeric degeneracy
    const fs::path degen = out / "degen.ini";
    std::ofstream(degen) << "[scenario]\nname = degen\n[grid]\nx0 = 0.5 1.5 9\nx1 = 0.5 1.5 9\nx2 = 0.5 1.5 9\n"
                         << "[initial]\nkind = kerr\nt0 = 1.0\n[kerr]\nterms = 1 0 0 1 0\n";
    CHECK(sh(kExe + " run --config " + degen.string() + o) == 4);
}

TEST_CASE("sfrlab verify-examples") {
    CHECK(sh(kExe + " verify-examples charge") == 0);
    CHECK(sh(kExe + " verify-examples s3-hopf") == 0);
    CHECK(sh(kExe + " verify-examples massless") == 0);
    CHECK(sh(kExe + " verify-examples no-such-example") == 2);
    // an impossible tolerance scale names the failing check
    CHECK(sh(kExe + " verify-examples charge --tol-scale 1e-20") == 3);

    const auto cs = verify_examples("charge");
    REQUIRE(cs.size() == 2);
    CHECK(cs[0].name == "charge_sphere");
    CHECK(cs[0].value < 1e-6);
}

TEST_CASE("sfrlab diagnose and convergence on a reduced model") {
    const fs::path out = scratch("exe_diag");
    const std::string o = " --out " + out.string();
    CHECK(sh(kExe + " diagnose --config " + kScenarios + "/s3-kl.ini" + o) == 0);
    CHECK(fs::exists(out / "s3-kl" / "reduced_rhs.csv"));
    CHECK(sh(kExe + " convergence --config " + kScenarios + "/s3-kl.ini --refine 2" + o) == 0);
    const std::string csv = slurp(out / "s3-kl" / "convergence.csv");
    CHECK(csv.rfind("# schema_version=", 0) == 0);
    CHECK(csv.find("level,n0,dt,error,slope") != std::string::npos);
    CHECK(sh(kExe + " diagnose --config " + kScenarios + "/case1-radial.ini" + o) == 0);
    CHECK(fs::exists(out / "case1-radial" / "diagnostics.csv"));
}

TEST_CASE("identical scenario and seed give bit-identical CSV output") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const std::string cfg = kScenarios + "/random-sfr.ini";
    REQUIRE(sh(kExe + " run --config " + cfg + " --out " + a.string()) == 0);
    REQUIRE(sh(kExe + " run --config " + cfg + " --out " + b.string()) == 0);
    int n = 0;
    for (const auto& e : fs::directory_iterator(a / "random-sfr")) {
        if (e.path().extension() != ".csv") continue;
        CAPTURE(e.path().filename());
        CHECK(slurp(e.path()) == slurp(b / "random-sfr" / e.path().filename()));
        ++n;
    }
    CHECK(n >= 3);

    // a different seed changes the datum
    Scenario s7 = load_scenario(cfg), s8 = s7;
    s8.seed = 8;
    CHECK(prepare_run(s7).initial.U[100] != prepare_run(s8).initial.U[100]);
}

TEST_CASE("SFRLAB_OUT redirects output; --out wins over it") {
    const fs::path env = scratch("env_out"), cli = scratch("cli_out");
    const std::string cfg = kScenarios + "/hopf-s3.ini";
    CHECK(sh("SFRLAB_OUT=" + env.string() + " " + kExe + " run --config " + cfg) == 0);
    CHECK(fs::exists(env / "hopf-s3" / "summary.json"));
    fs::remove_all(env / "hopf-s3");
    CHECK(sh("SFRLAB_OUT=" + env.string() + " " + kExe + " run --config " + cfg + " --out " + cli.string()) == 0);
    CHECK(fs::exists(cli / "hopf-s3" / "summary.json"));
    CHECK_FALSE(fs::exists(env / "hopf-s3"));
}
