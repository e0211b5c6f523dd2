#include <catch_amalgamated.hpp>

#include <string>

#include "walker3/report.hpp"
#include "walker3/runner.hpp"
#include "walker3/scenario.hpp"

using namespace walker3;

namespace {

const char* kGoodConfig = R"(
# comment
[metric]
epsilon = 1
f = "x^2"            # inline comment
box = -1 1 -1 1 -1 1
grid = 3 9 9

[surface]
kind = ode
eta = 1
c = 0
x0 = 1
xp0 = 1
v_range = 0 1
step = 0.002
u_range = 0 1
grid = 7 25

[analysis]
delta = 1
seed = 42
trials = 200
tol_umbilic = 2e-5

[output]
path = out/demo
format = structured
)";

}  // namespace

TEST_CASE("scenario parsing", "[scenario]") {
    const Scenario sc = parse_scenario_string(kGoodConfig, "demo.cfg");
    CHECK(sc.metric.epsilon == 1);
    CHECK(sc.metric.f_source == "x^2");
    CHECK(sc.metric.box.x0 == -1.0);
    CHECK(sc.metric.nx == 9);
    CHECK(sc.surface.kind == SurfaceKind::Ode);
    CHECK(sc.surface.step == 0.002);
    CHECK(sc.surface.nu == 7);
    CHECK(sc.analysis.delta == 1);
    CHECK(sc.analysis.seed == 42);
    CHECK(sc.analysis.trials == 200);
    CHECK(sc.tol("umbilic") == 2e-5);
    CHECK(sc.tol("exact") == 1e-12);
    CHECK(sc.output.path == "out/demo");
    CHECK(sc.output.format == "structured");
}

TEST_CASE("scenario validation errors carry file, line and key", "[scenario]") {
    const auto expect_error = [](const std::string& cfg, const std::string& fragment) {
        try {
            parse_scenario_string(cfg, "bad.cfg");
            FAIL("expected ConfigError for: " + fragment);
        } catch (const ConfigError& e) {
            INFO(e.what());
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };

    expect_error("[metric]\nepsilon = 3\nf = \"x\"\n", "epsilon");
    expect_error("[metric]\nf = \"x^2 +\"\n", "bad metric expression");
    expect_error("[metric]\nf = \"q\"\n", "unknown identifier");
    expect_error("[metric]\nepsilon = 1\n", "missing metric key 'f'");
    expect_error("[metrics]\nf = \"x\"\n", "unknown section");
    expect_error("[metric]\nf = \"x\"\nbogus = 1\n", "bogus");
    expect_error("[metric]\nf = \"x\"\nbox = 1 1 -1 1 -1 1\n", "degenerate");
    expect_error("[metric]\nf = \"x\"\ngrid = 1 9 9\n", ">= 2");
    expect_error("[metric]\nf = \"x\"\n[surface]\nt = \"u\"\n", "kind");
    expect_error("[metric]\nf = \"x\"\n[surface]\nkind = ode\nt = \"u\"\n", "explicit");
    expect_error("[metric]\nf = \"x\"\n[surface]\nkind = explicit\nt = \"u\"\nx = \"v\"\n", "missing surface key 'y'");
    expect_error("[metric]\nf = \"x\"\n[analysis]\ntol_nonsense = 1\n", "unknown tolerance");
    expect_error("[metric]\nf = \"x\"\n[analysis]\ntrials = 0\n", "trials");
    expect_error("[metric]\nf = \"x\"\n[output]\nformat = yaml\n", "format");
    expect_error("[metric]\nf = \"x\"\nepsilon == 1\n", "number");
    expect_error("key = 1\n", "outside any section");
    expect_error("[metric]\nf = \"x\"\nf = \"y\"\n", "duplicate key");

    try {
        parse_scenario_string("[metric]\nf = \"x\"\nbogus = 1\n", "bad.cfg");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.file == "bad.cfg");
        CHECK(e.line == 3);
        CHECK(e.key == "bogus");
    }
}

TEST_CASE("tolerance overrides", "[scenario]") {
    Scenario sc = parse_scenario_string("[metric]\nf = \"x^2\"\n");
    apply_tolerance_override(sc, "umbilic=3e-4");
    CHECK(sc.tol("umbilic") == 3e-4);
    CHECK_THROWS_AS(apply_tolerance_override(sc, "nonsense=1"), ConfigError);
    CHECK_THROWS_AS(apply_tolerance_override(sc, "umbilic"), ConfigError);
    CHECK_THROWS_AS(apply_tolerance_override(sc, "umbilic=-1"), ConfigError);
    CHECK_THROWS_AS(sc.tol("nonsense"), ConfigError);
}

TEST_CASE("report rendering is stable and ordered", "[scenario]") {
    Report r;
    r.set("alpha", 1.5);
    r.set("zero", -0.0);
    r.set("nan_value", std::nan(""));
    auto& c = r.child("nested");
    c.set("flag", true);
    c.set("count", std::size_t{7});

    const std::string text = r.to_text();
    CHECK(text == "alpha: 1.5\nzero: 0\nnan_value: nan\nnested:\n  flag: true\n  count: 7\n");
    CHECK(r.to_text() == text);

    const auto j = r.to_json();
    CHECK(j.dump() == R"({"alpha":"1.5","zero":"0","nan_value":"nan","nested":{"flag":"true","count":"7"}})");
}

TEST_CASE("csv table layout", "[scenario]") {
    UmbilicScanResult scan;
    UmbilicPointRecord rec;
    rec.u = 0.5;
    rec.v = 0.25;
    rec.p = Point{0.5, 1.0, 0.25};
    rec.lambda = 0;
    rec.rho = 1e-9;
    rec.v1 = 1;
    rec.v2 = -0.5;
    rec.v3 = -0.5;
    rec.fx = 2;
    rec.fxx = 2;
    rec.fxxx = 0;
    rec.obstruction = 0;
    scan.points.push_back(rec);
    const CsvTable t = detail::umbilic_points_table(scan);
    const std::string body = t.to_string();
    CHECK(body.rfind("u,v,t,x,y,lambda,rho,v1,v2,v3,fx,fxx,fxxx,obstruction\n", 0) == 0);
    CHECK(body.find("0.5,0.25,0.5,1,0.25,0,1e-09,1,-0.5,-0.5,2,2,0,0") != std::string::npos);
}

TEST_CASE("runner outcomes stay deterministic", "[scenario]") {
    Scenario sc = parse_scenario_string(kGoodConfig, "demo.cfg");
    sc.analysis.trials = 50;  // keep the unit suite fast
    const auto once = run_all(sc);
    const auto twice = run_all(sc);
    CHECK(once.exit_code == 0);
    CHECK(once.report.to_text() == twice.report.to_text());
    REQUIRE(once.tables.size() == twice.tables.size());
    for (std::size_t i = 0; i < once.tables.size(); ++i) {
        CHECK(once.tables[i].name == twice.tables[i].name);
        CHECK(once.tables[i].content == twice.tables[i].content);
    }
    const auto files_a = render_outcome("all", sc, once);
    const auto files_b = render_outcome("all", sc, twice);
    REQUIRE(files_a.size() == files_b.size());
    for (std::size_t i = 0; i < files_a.size(); ++i) CHECK(files_a[i].content == files_b[i].content);
    CHECK(files_a[0].name == "all_report.json");  // structured format requested
}

TEST_CASE("structured reports carry the documented envelope", "[scenario]") {
    Scenario sc = parse_scenario_string("[metric]\nf = \"x^2\"\nbox = -1 1 -1 1 -1 1\ngrid = 2 4 4\n");
    sc.analysis.trials = 20;
    sc.output.format = "structured";
    const auto outcome = run_subcommand("lcf-test", sc);
    const auto files = render_outcome("lcf-test", sc, outcome);
    REQUIRE(files.at(0).name == "lcf-test_report.json");
    const auto j = nlohmann::ordered_json::parse(files.at(0).content);
    for (const char* key : {"tool", "version", "subcommand", "seed", "scenario", "results", "exit_code"})
        REQUIRE(j.contains(key));
    CHECK(j["tool"] == "walker3");
    CHECK(j["subcommand"] == "lcf-test");
    CHECK(j["scenario"]["metric"]["f"] == "x^2");
    CHECK(j["results"]["lcf_test"].contains("fxxx_criterion"));
    // csv sidecar present
    REQUIRE(files.size() >= 2);
    CHECK(files.at(1).name == "lcf_points.csv");
    CHECK(files.at(1).content.rfind("t,x,y,fxxx,cotton_max\n", 0) == 0);
}

TEST_CASE("subcommand dispatch and prerequisites", "[scenario]") {
    Scenario sc = parse_scenario_string("[metric]\nf = \"x^2\"\n");
    CHECK_THROWS_AS(run_subcommand("umbilic-scan", sc), ConfigError);
    CHECK_THROWS_AS(run_subcommand("parallel-construct", sc), ConfigError);
    CHECK_THROWS_AS(run_subcommand("nonsense", sc), ConfigError);
    sc.analysis.trials = 20;
    CHECK(run_subcommand("frame-check", sc).exit_code == 0);
}
