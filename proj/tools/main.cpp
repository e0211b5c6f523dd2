#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "walker3/runner.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> tol_overrides;
    std::string out_dir;
    std::string format;
    bool seed_set = false;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "scenario config file")->required();
    cmd->add_option("--seed", opts.seed, "override the scenario seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--tol-override", opts.tol_overrides, "override a tolerance, name=value (repeatable)");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides the scenario)");
    cmd->add_option("--format", opts.format, "report format: text or structured")
        ->check(CLI::IsMember({"text", "structured"}));
}

int run(const std::string& name, const CommonOptions& opts) {
    walker3::Scenario sc = walker3::parse_scenario_file(opts.config_path);
    if (opts.seed_set) sc.analysis.seed = opts.seed;
    for (const auto& ov : opts.tol_overrides) walker3::apply_tolerance_override(sc, ov);
    if (!opts.out_dir.empty()) sc.output.path = opts.out_dir;
    if (!opts.format.empty()) sc.output.format = opts.format;

    const auto start = std::chrono::steady_clock::now();
    const walker3::RunOutcome outcome = walker3::run_subcommand(name, sc);
    const auto files = walker3::render_outcome(name, sc, outcome);
    walker3::write_output_files(sc.output.path, files);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    // wall clock goes to the console only; report files stay byte-stable
    std::cout << walker3::kToolName << " " << name << ": "
              << (outcome.exit_code == 0 ? "PASS" : "FAIL (witnesses in report)") << "\n";
    for (const auto& f : files) std::cout << "  wrote " << sc.output.path << "/" << f.name << "\n";
    std::printf("  wall-clock: %.3fs\n", elapsed.count());
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verification toolkit for the geometry of Walker three-manifolds"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"frame-check", "metric, frame and connection invariants"},
        {"curvature-check", "closed-form curvature vs the coordinate oracle"},
        {"lcf-test", "f_xxx criterion vs the Cotton-tensor oracle"},
        {"umbilic-scan", "surface pipeline: scan, classify, audit"},
        {"parallel-construct", "integrate the profile ODE and verify the family"},
        {"theorem-audit", "seeded sweeps of the algebraic identities"},
        {"all", "every suite the scenario enables"},
    };

    std::vector<std::unique_ptr<CommonOptions>> option_blocks;
    for (const auto& [name, desc] : commands) {
        auto* cmd = app.add_subcommand(name, desc);
        option_blocks.push_back(std::make_unique<CommonOptions>());
        add_common(cmd, *option_blocks.back());
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        for (std::size_t i = 0; i < commands.size(); ++i)
            if (app.get_subcommands().at(0)->get_name() == commands[i].first)
                return run(commands[i].first, *option_blocks[i]);
        return 2;
    } catch (const walker3::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const walker3::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const walker3::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
