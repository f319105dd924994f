#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sfclab {

// Raised for malformed configs, unknown experiments or keys, violated
// parameter invariants. The CLI maps it to exit code 2; every other failure
// exits with 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key = value file; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// SFCLAB_SEED and SFCLAB_OUT override the file values (and nothing else).
void apply_env_overrides(std::map<std::string, std::string>& config);

struct ExperimentInfo {
    std::string name;
    std::string what;  // one line: which quantity the experiment measures
};

const std::vector<ExperimentInfo>& experiment_registry();

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;
};

struct Report {
    std::string experiment;
    std::map<std::string, std::string> config;  // fully resolved echo
    std::string fingerprint;  // hash of experiment + result-affecting config
    std::vector<Table> tables;
    nlohmann::json summary;  // scalar results, standard errors, references
    double wall_ms = 0.0;    // never serialized into CSV
};

// Resolves defaults, validates every key, dispatches, and measures wall time.
// All inputs default to the canonical case (x0 = k = 100, r = 0.05,
// sigma = 0.2, mu = 0.10, T = 1), so an empty config runs everything.
Report run_experiment(const std::string& experiment,
                      std::map<std::string, std::string> config);

// format "csv": one <experiment>_<table>.csv per table plus
// <experiment>_summary.csv, bodies byte-deterministic for a given config and
// seed. format "json": a single <experiment>.json carrying the config echo,
// fingerprint, tables, summary and timing. Returns the files written.
std::vector<std::string> emit_report(const Report& report, const std::string& out_dir,
                                     const std::string& format);

}  // namespace sfclab
