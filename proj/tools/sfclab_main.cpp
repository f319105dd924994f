#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "sfclab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"simulation laboratory for continuous-time replication arguments"};
    app.name("sfc-lab");

    std::string experiment;
    std::string config_path;
    std::string seed_arg, out_arg, format_arg;
    app.add_option("experiment", experiment,
                   "experiment name, or 'list' to enumerate the registry")
        ->required();
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--seed", seed_arg, "override the rng seed");
    app.add_option("--out", out_arg, "output directory (default: out)");
    app.add_option("--format", format_arg, "csv or json (default: csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (experiment == "list") {
            for (const auto& info : sfclab::experiment_registry())
                std::printf("%-15s %s\n", info.name.c_str(), info.what.c_str());
            return 0;
        }

        std::map<std::string, std::string> config;
        if (!config_path.empty()) config = sfclab::parse_config_file(config_path);
        sfclab::apply_env_overrides(config);
        if (!seed_arg.empty()) config["seed"] = seed_arg;
        if (!out_arg.empty()) config["out"] = out_arg;
        if (!format_arg.empty()) config["format"] = format_arg;

        const sfclab::Report report = sfclab::run_experiment(experiment, config);
        const auto files = sfclab::emit_report(report, report.config.at("out"),
                                               report.config.at("format"));
        std::printf("%s  fingerprint %s  %.1f ms\n", experiment.c_str(),
                    report.fingerprint.c_str(), report.wall_ms);
        for (const auto& f : files) std::printf("  wrote %s\n", f.c_str());
        return 0;
    } catch (const sfclab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
