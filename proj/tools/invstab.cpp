// invstab: run scenario files through the equilibrium, pole-map, admittance
// and time-domain analyses.

#include "invstab/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Small-signal and time-domain stability analysis of grid-connected inverters"};
    app.set_version_flag("--version", invstab::kToolVersion);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a scenario file");
    std::string file;
    std::string out_dir;
    double pre_roll = 0.0;
    bool seedless = false;
    std::string guess;
    run->add_option("scenario", file, "Scenario file")->required()->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--out", out_dir, "Output directory (default $INVSTAB_OUT or .)");
    auto* pre_opt = run->add_option("--pre-roll", pre_roll, "Seconds before the SCR step in simulate runs")
                        ->check(CLI::PositiveNumber);
    run->add_flag("--seedless", seedless, "Accepted for compatibility; every analysis is deterministic");
    auto* guess_opt = run->add_option("--guess", guess, "Equilibrium CSV used as the initial guess")
                          ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    invstab::RunOptions opts;
    if (*out_opt) {
        opts.out_dir = out_dir;
    } else if (const char* env = std::getenv("INVSTAB_OUT"); env && *env) {
        opts.out_dir = env;
    }
    if (*pre_opt) opts.pre_roll = pre_roll;
    if (*guess_opt) opts.guess = guess;
    return invstab::run_file(file, opts, std::cout, std::cerr);
}
