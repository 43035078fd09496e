// Command-line runner for the experiment pipelines.
//
//   orbm <subcommand> --config PATH [--seed N] [--out DIR] [--threads N]
//
// Exit status: 0 success, 1 configuration error, 2 a checked condition or
// bound failed, 3 numerical failure.

#include "orbm/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification runs for reflected Brownian motion in alpha-fair cones"};
    app.require_subcommand(1);

    orbm::RunOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    for (const auto& name : orbm::subcommands()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "key = value configuration file")->required();
        sub->add_option("--seed", seed, "master seed (overrides the file)");
        sub->add_option("--out", out, "output directory (overrides [output] dir)");
        sub->add_option("--threads", opts.threads, "worker threads; results do not depend on it")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : orbm::kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed") > 0) opts.seed = seed;
    if (chosen->count("--out") > 0) opts.out_dir = out;
    return orbm::run_experiment(chosen->get_name(), opts, std::cerr);
}
