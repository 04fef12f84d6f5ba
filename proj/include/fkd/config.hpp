#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fkd/stopping.hpp"

namespace fkd {

// Parsed and validated run configuration: the model, domain and problem data
// plus simulation/oracle/output settings, built from a single JSON document.
struct RunConfig {
    DiffusionModel model;
    DomainSpec domain;
    ProblemSpec problem;
    bool has_problem = false;

    std::vector<double> query_x;
    double query_t = 0.0;
    std::vector<std::vector<double>> x_sweep;

    SimConfig sim;
    long n_paths = 10000;
    long n_train = 20000;
    int n_slabs = 50;
    int basis_degree = 0;
    int threads = 1;
    double probe_b = 0.0; // 0 = domain default

    // oracle settings
    std::vector<int> oracle_nodes;
    double grading_ratio = 1.2;
    double first_cell_frac = 1e-3;
    std::vector<double> truncation_hi, truncation_lo;
    SolverOptions solver;

    // output
    std::string out_dir;
    long dump_paths = 0;
    bool emit_csv = false;

    std::string raw_json; // canonical round-trip source
};

RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::string>& overrides = {});
RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::string>& overrides = {});

// Runs a subcommand against a parsed config; returns the report as a JSON
// string (pretty, deterministic key order) and writes CSV artifacts under
// cfg.out_dir when requested.
std::string run_classify(const RunConfig& cfg);
std::string run_price(const RunConfig& cfg);
std::string run_exercise(const RunConfig& cfg);
std::string run_oracle(const RunConfig& cfg);
std::string run_compare(const RunConfig& cfg);

// Dispatcher used by the CLI binary: writes the report to out, errors to err;
// returns the process exit code (0 ok, 2 validation failure, 3 numerical
// failure).
int run_subcommand(const std::string& name, const std::string& config_path,
                   const std::vector<std::string>& overrides, std::ostream& out,
                   std::ostream& err);

// Strips the volatile timestamp line so reports can be compared byte-wise.
std::string strip_timestamp(const std::string& report_json);

} // namespace fkd
