#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hbmecc/experiment.hpp"

// Experiment runner. Reads a JSON config, executes the parameter grid and
// writes deterministic CSV. Exit codes: 0 success, 1 config error,
// 2 runtime error.

int main(int argc, char** argv) {
    CLI::App app{"hbmecc: controller-side HBM fault-tolerance simulator"};
    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    int jobs = 1;
    bool print_only = false;

    app.add_option("--config", config_path, "experiment config file (JSON)")->required();
    app.add_option("--out", out_override, "override the config's output path");
    app.add_option("--seed", seed_override, "override the config's master seed")->each([&](const std::string&) {
        seed_given = true;
    });
    app.add_option("--jobs", jobs, "worker threads for the sweep grid")->check(CLI::Range(1, 256));
    app.add_flag("--print-config", print_only, "echo the parsed config and exit");

    CLI11_PARSE(app, argc, argv);

    hbmecc::ExperimentConfig cfg;
    try {
        cfg = hbmecc::load_config_file(config_path);
    } catch (const hbmecc::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    if (seed_given) cfg.master_seed = seed_override;
    if (!out_override.empty()) cfg.out = out_override;

    if (print_only) {
        std::cout << hbmecc::print_config(cfg);
        return 0;
    }

    try {
        const std::string path = hbmecc::run_experiment(cfg, jobs);
        std::cout << "wrote " << path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
