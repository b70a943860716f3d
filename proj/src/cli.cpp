#include "driftadapt/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "driftadapt/errors.hpp"
#include "driftadapt/pipeline.hpp"

namespace driftadapt {

namespace {

std::filesystem::path default_out_root() {
    if (const char* env = std::getenv("DRIFT_ADAPT_OUT")) return env;
    return "runs";
}

int dispatch(const std::string& command, const PipelineConfig& config, const RunPaths& paths) {
    if (command == "simulate") {
        stage_simulate(config, paths);
    } else if (command == "build-dataset") {
        stage_build_dataset(config, paths);
    } else if (command == "weights") {
        const auto set = stage_weights(config, paths);
        nlohmann::json j{{"source_physics", set.source_physics},
                         {"target_physics", set.target_physics},
                         {"sigma", set.sigma},
                         {"sigma_mode", to_string(set.sigma_mode)},
                         {"raw_similarity", set.raw_similarity},
                         {"weights", set.weights}};
        std::cout << j.dump(2) << "\n";
    } else if (command == "train") {
        stage_train(config, paths, false);
    } else if (command == "train-baseline") {
        stage_train(config, paths, true);
    } else if (command == "evaluate") {
        stage_evaluate(config, paths);
    } else if (command == "compare") {
        stage_compare(config, paths);
    } else if (command == "pipeline") {
        stage_pipeline(config, paths);
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Label-free per-story seismic damage assessment via physics-weighted "
                 "multi-source adversarial domain adaptation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file;
    std::uint64_t seed_flag = 0;
    std::string out_root;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "JSON config file (defaults apply when omitted)");
    auto* seed_opt = app.add_option("--seed", seed_flag, "Override the global seed");
    app.add_option("--out", out_root, "Output root (default $DRIFT_ADAPT_OUT or ./runs)");
    app.add_option("--set", overrides, "Override a config value, e.g. --set training.epochs=10");

    for (const char* name : {"simulate", "build-dataset", "weights", "train", "train-baseline",
                             "evaluate", "compare", "pipeline"}) {
        app.add_subcommand(name);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        std::optional<std::filesystem::path> file;
        if (!config_file.empty()) file = config_file;
        std::optional<std::uint64_t> seed;
        if (seed_opt->count() > 0) seed = seed_flag;
        const auto config = PipelineConfig::load(file, overrides, seed);
        const auto root = out_root.empty() ? default_out_root() : std::filesystem::path(out_root);
        const auto paths = make_run_paths(config, root);

        return dispatch(command, config, paths);
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "stage " << command << " failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace driftadapt
