#include "geosteer/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"geosteer: information geometry and steering for softmax models"};
    app.require_subcommand(1);

    std::string config_path;
    const auto add = [&](const char* name, const char* description) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("config", config_path, "run configuration file")
            ->required();
        return sub;
    };

    CLI::App* synthesize =
        add("synthesize", "build a factorizable test model, scheme, and probe");
    CLI::App* interpolate =
        add("interpolate", "trace a primal or dual interpolation path");
    CLI::App* steer = add("steer", "run a steering sweep with metrics");
    CLI::App* diagnose =
        add("diagnose", "per-step cosine and probing diagnostics");
    CLI::App* metrics = add("metrics", "recompute metrics from a trace");

    CLI11_PARSE(app, argc, argv);

    geosteer::ConfigFile config;
    try {
        config = geosteer::ConfigFile::parse_file(config_path);
    } catch (const geosteer::Error& err) {
        std::cerr << err.what() << "\n";
        return err.code() == geosteer::errc::io_failure ? geosteer::cli::kExitIo
                                                        : geosteer::cli::kExitConfig;
    }

    if (synthesize->parsed()) return geosteer::cli::cmd_synthesize(config);
    if (interpolate->parsed()) return geosteer::cli::cmd_interpolate(config);
    if (steer->parsed()) return geosteer::cli::cmd_steer(config);
    if (diagnose->parsed()) return geosteer::cli::cmd_diagnose(config);
    if (metrics->parsed()) return geosteer::cli::cmd_metrics(config);
    return geosteer::cli::kExitConfig;
}
