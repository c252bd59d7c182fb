// Scenario-driven front end: validate scenario files, run their analysis
// tasks into deterministic CSV/JSON bundles, emit the bundled demos.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dqlab/errors.hpp"
#include "dqlab/io.hpp"
#include "dqlab/scenario.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_numeric = 3;
constexpr int exit_io = 4;

int run_command(const std::string& scenario_path, const std::optional<std::string>& out_dir,
                const std::optional<std::uint64_t>& seed, const std::optional<double>& hbar) {
    dqlab::Scenario scenario = dqlab::load_scenario(scenario_path);
    if (seed) scenario.seed = *seed;
    if (hbar) {
        if (!(*hbar > 0.0)) throw dqlab::validation_error("--hbar must be positive");
        scenario.hbar = *hbar;
    }
    for (const auto& warning : scenario.warnings)
        std::cerr << "warning: " << warning << "\n";
    const dqlab::ResultBundle bundle = dqlab::run_scenario(scenario, out_dir);
    std::cout << "wrote " << bundle.files.size() << " result file(s) and manifest to "
              << bundle.directory.string() << "\n";
    return exit_ok;
}

int validate_command(const std::string& scenario_path) {
    const dqlab::Scenario scenario = dqlab::load_scenario(scenario_path);
    for (const auto& warning : scenario.warnings)
        std::cerr << "warning: " << warning << "\n";
    std::cout << "scenario valid: " << scenario.tasks.size() << " task(s)\n";
    return exit_ok;
}

int demo_command(const std::string& name, const std::optional<std::string>& out_dir) {
    const std::string text = dqlab::demo_scenario_text(name);
    const std::filesystem::path dir = out_dir ? *out_dir : ".";
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = dir / (name + ".json");
    dqlab::write_file(path, text);
    std::cout << "wrote " << path.string() << "\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dqlab: quantum measurement noise laboratory on a discrete time grid"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> hbar;
    std::string demo_name;

    auto* run = app.add_subcommand("run", "run a scenario's tasks");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory (overrides scenario output_dir)");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--hbar", hbar, "Planck constant override");

    auto* validate = app.add_subcommand("validate", "validate a scenario without running it");
    validate->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* demo = app.add_subcommand("demo", "write a bundled demo scenario file");
    demo->add_option("name", demo_name, "one of: two_quadrature, dql_recovery, memoryless_qcrb")
        ->required();
    demo->add_option("--out", out_dir, "directory for the scenario file");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return run_command(scenario_path, out_dir, seed, hbar);
        if (validate->parsed()) return validate_command(scenario_path);
        if (demo->parsed()) return demo_command(demo_name, out_dir);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const dqlab::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const dqlab::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const dqlab::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    }
    return exit_ok;
}
