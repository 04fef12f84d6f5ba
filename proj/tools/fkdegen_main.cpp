#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fkd/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo and finite-difference evaluation of boundary-value and "
                 "obstacle problems for degenerate diffusions on the half-space"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 0;
    std::string out_dir;
    long dump_paths = -1;

    const char* subnames[] = {"classify", "price", "exercise", "oracle", "compare"};
    const char* subdesc[] = {
        "boundary classification report for the degenerate coordinate",
        "Monte Carlo estimate of a boundary-value problem",
        "optimal-stopping value and exercise policy for an obstacle problem",
        "finite-difference solve of the same problem",
        "run Monte Carlo and the PDE oracle and emit the difference table"};

    for (int i = 0; i < 5; ++i) {
        auto* sub = app.add_subcommand(subnames[i], subdesc[i]);
        sub->add_option("config", config_path, "JSON run configuration")->required();
        sub->add_option("--set", overrides,
                        "override a config entry, e.g. --set sim.dt=0.001");
        sub->add_option("--threads", threads, "worker thread cap (default 1)");
        sub->add_option("--out", out_dir, "artifact output directory");
        sub->add_option("--dump-paths", dump_paths, "dump the first N simulated paths as CSV");
    }

    CLI11_PARSE(app, argc, argv);

    if (threads <= 0) {
        if (const char* env = std::getenv("FKDEGEN_THREADS")) threads = std::atoi(env);
        if (threads <= 0) threads = 1;
    }
    overrides.push_back("threads=" + std::to_string(threads));
    if (!out_dir.empty()) overrides.push_back("output.dir=" + out_dir);
    if (dump_paths >= 0) overrides.push_back("output.dump_paths=" + std::to_string(dump_paths));

    std::string sub = app.get_subcommands().front()->get_name();
    return fkd::run_subcommand(sub, config_path, overrides, std::cout, std::cerr);
}
