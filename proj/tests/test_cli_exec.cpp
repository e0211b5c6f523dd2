// End-to-end checks of the installed command-line tool: exit codes 0/1/2 and
// the error diagnostics promised by the scenario format.

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef WALKER3_CLI_PATH
#error "WALKER3_CLI_PATH must point at the built executable"
#endif

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const fs::path dir = fs::temp_directory_path() / "walker3_cli_exec";
    fs::create_directories(dir);
    const fs::path capture = dir / "capture.txt";
    const std::string cmd = std::string("\"") + WALKER3_CLI_PATH + "\" " + args + " > " +
                            capture.string() + " 2>&1";
    const int ret = std::system(cmd.c_str());
    std::ifstream in(capture);
    std::ostringstream oss;
    oss << in.rdbuf();
    return CliResult{ret == -1 ? -1 : WEXITSTATUS(ret), oss.str()};
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "walker3_cli_exec";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("exit code 0 on a passing scenario", "[cli]") {
    const auto cfg = write_config("pass.cfg",
                                  "[metric]\nf = \"x^2\"\nbox = -1 1 -1 1 -1 1\ngrid = 2 5 5\n"
                                  "[analysis]\nseed = 1\ntrials = 50\n");
    const auto out_dir = (fs::temp_directory_path() / "walker3_cli_exec" / "ok").string();
    const auto res = run_cli("theorem-audit --config " + cfg.string() + " --out " + out_dir);
    INFO(res.output);
    CHECK(res.code == 0);
    CHECK(res.output.find("PASS") != std::string::npos);
    CHECK(fs::exists(fs::path(out_dir) / "theorem-audit_report.txt"));
}

TEST_CASE("exit code 1 on a failing check with witnesses", "[cli]") {
    const auto cfg = write_config("fail.cfg",
                                  "[metric]\nf = \"x^3\"\nbox = -1 1 0.5 1.5 -1 1\ngrid = 2 5 5\n"
                                  "[surface]\nkind = explicit\nt = \"u\"\nx = \"1 + u^2 + v^2\"\ny = \"v\"\n"
                                  "u_range = -0.3 0.3\nv_range = -0.3 0.3\ngrid = 5 5\n"
                                  "[analysis]\ndelta = 1\nseed = 1\n");
    const auto out_dir = (fs::temp_directory_path() / "walker3_cli_exec" / "fail").string();
    const auto res = run_cli("umbilic-scan --config " + cfg.string() + " --out " + out_dir);
    INFO(res.output);
    CHECK(res.code == 1);
    std::ifstream report(fs::path(out_dir) / "umbilic-scan_report.txt");
    std::ostringstream oss;
    oss << report.rdbuf();
    CHECK(oss.str().find("non_umbilical") != std::string::npos);
    CHECK(oss.str().find("worst_rho_point") != std::string::npos);
}

TEST_CASE("exit code 2 on config and usage errors", "[cli]") {
    SECTION("malformed expression cites the parse position") {
        const auto cfg = write_config("badexpr.cfg", "[metric]\nf = \"x^2 +\"\n");
        const auto res = run_cli("frame-check --config " + cfg.string());
        INFO(res.output);
        CHECK(res.code == 2);
        CHECK(res.output.find("offset") != std::string::npos);
        CHECK(res.output.find("badexpr.cfg") != std::string::npos);
    }
    SECTION("unknown key cites file, line and key") {
        const auto cfg = write_config("badkey.cfg", "[metric]\nf = \"x\"\nwibble = 3\n");
        const auto res = run_cli("frame-check --config " + cfg.string());
        CHECK(res.code == 2);
        CHECK(res.output.find("badkey.cfg:3") != std::string::npos);
        CHECK(res.output.find("wibble") != std::string::npos);
    }
    SECTION("missing config file") {
        const auto res = run_cli("frame-check --config /nonexistent/nope.cfg");
        CHECK(res.code == 2);
    }
    SECTION("missing required option") {
        const auto res = run_cli("frame-check");
        CHECK(res.code == 2);
    }
    SECTION("unknown subcommand") {
        const auto res = run_cli("definitely-not-a-command --config x");
        CHECK(res.code == 2);
    }
}

TEST_CASE("structured format emits json", "[cli]") {
    const auto cfg = write_config("json.cfg",
                                  "[metric]\nf = \"x^2\"\nbox = -1 1 -1 1 -1 1\ngrid = 2 4 4\n"
                                  "[analysis]\nseed = 3\ntrials = 20\n");
    const auto out_dir = (fs::temp_directory_path() / "walker3_cli_exec" / "json").string();
    const auto res = run_cli("lcf-test --config " + cfg.string() + " --out " + out_dir + " --format structured");
    CHECK(res.code == 0);
    std::ifstream report(fs::path(out_dir) / "lcf-test_report.json");
    std::ostringstream oss;
    oss << report.rdbuf();
    CHECK(oss.str().rfind("{", 0) == 0);
    CHECK(oss.str().find("\"verdicts_agree\": \"true\"") != std::string::npos);
    CHECK(fs::exists(fs::path(out_dir) / "lcf_points.csv"));
}
