#include "driftadapt/pipeline.hpp"

#include <cstdio>
#include <iostream>

#include <nlohmann/json.hpp>

#include "driftadapt/archive.hpp"
#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/evaluation.hpp"
#include "driftadapt/rng.hpp"
#include "driftadapt/trainer.hpp"

namespace driftadapt {

using nlohmann::json;

RunPaths make_run_paths(const PipelineConfig& config, const std::filesystem::path& out_root) {
    return {out_root / ("run_" + config.hash() + "_seed" + std::to_string(config.seed()))};
}

namespace {

void require_artifact(const std::filesystem::path& p, const std::string& producer) {
    if (!std::filesystem::exists(p)) {
        throw SchemaError("missing " + p.string() + "; run `" + producer + "` first");
    }
}

void require_hash(const std::string& artifact_hash, const PipelineConfig& config,
                  const std::string& what) {
    if (artifact_hash != config.hash()) {
        throw SchemaError(what + " was produced under config hash " + artifact_hash +
                          ", current config hashes to " + config.hash() + "; refusing to mix runs");
    }
}

void simulate_building(const PipelineConfig& config, const BuildingSpec& building,
                       const std::filesystem::path& dir) {
    const auto campaign = config.campaign();
    ResponseArchiveWriter writer(dir, building, config.hash());
    for (std::size_t m = 0; m < campaign.n_motions; ++m) {
        const auto seed = derive_seed(config.seed(), "motion", m);
        GroundMotion base = synthesize_motion(seed, campaign.duration, campaign.dt, campaign.spectral);
        const double pga = base.peak_ground_acceleration();
        for (std::size_t level = 0; level < campaign.target_pga.size(); ++level) {
            GroundMotion scaled = scale_motion(base, campaign.target_pga[level] / pga);
            char id[32];
            std::snprintf(id, sizeof id, "gm%03zu_l%02zu", m, level);
            scaled.id = id;
            writer.add(simulate_response(building, scaled));
        }
    }
    writer.finalize();
}

}  // namespace

void stage_simulate(const PipelineConfig& config, const RunPaths& paths) {
    simulate_building(config, config.source_building(), paths.source_archive());
    simulate_building(config, config.target_building(), paths.target_archive());
}

void stage_build_dataset(const PipelineConfig& config, const RunPaths& paths) {
    require_artifact(paths.source_archive() / "manifest.json", "simulate");
    require_artifact(paths.target_archive() / "manifest.json", "simulate");
    ResponseArchiveReader source(paths.source_archive());
    ResponseArchiveReader target(paths.target_archive());
    require_hash(source.config_hash(), config, "source archive");
    require_hash(target.config_hash(), config, "target archive");
    const auto built = build_domains(source, target, config.dataset_config());
    save_dataset(built.bundle, built.target_eval_labels, paths.dataset());
}

SourceWeightSet stage_weights(const PipelineConfig& config, const RunPaths& paths) {
    const auto target_building = config.target_building();
    std::vector<double> source_physics;
    for (std::size_t story = 1; story <= 3; ++story) {
        source_physics.push_back(static_cast<double>(story) / 3.0);
    }
    const double target_physics = 1.0 / static_cast<double>(target_building.n_stories);
    const auto set = compute_weights(source_physics, target_physics, config.sigma_mode(),
                                     config.sigma_fixed());
    json j{{"source_physics", set.source_physics},
           {"target_physics", set.target_physics},
           {"sigma", set.sigma},
           {"sigma_mode", to_string(set.sigma_mode)},
           {"raw_similarity", set.raw_similarity},
           {"weights", set.weights},
           {"config_hash", config.hash()}};
    std::filesystem::create_directories(paths.root);
    write_text_file(paths.weights_json(), j.dump(2) + "\n");
    return set;
}

namespace {

std::vector<double> load_weights_file(const PipelineConfig& config, const RunPaths& paths) {
    require_artifact(paths.weights_json(), "weights");
    const json j = json::parse(read_text_file(paths.weights_json()));
    require_hash(j.at("config_hash").get<std::string>(), config, "weights file");
    return j.at("weights").get<std::vector<double>>();
}

DatasetBundle load_dataset_checked(const PipelineConfig& config, const RunPaths& paths) {
    require_artifact(paths.dataset() / "manifest.json", "build-dataset");
    auto bundle = load_dataset(paths.dataset());
    require_hash(bundle.config_hash, config, "dataset");
    return bundle;
}

ParameterStore load_checkpoint_checked(const PipelineConfig& config, const RunPaths& paths,
                                       bool baseline) {
    require_artifact(paths.checkpoint(baseline) / "manifest.json",
                     baseline ? "train-baseline" : "train");
    auto [info, params] = load_checkpoint(paths.checkpoint(baseline));
    require_hash(info.config_hash, config, "checkpoint");
    return params;
}

}  // namespace

void stage_train(const PipelineConfig& config, const RunPaths& paths, bool baseline) {
    const auto bundle = load_dataset_checked(config, paths);
    NetworkConfig net_config = config.network_config();
    Network<float> net(net_config);
    const auto train_config = config.train_config();

    TrainResult<float> result;
    if (baseline) {
        // Plain source-only supervised training; sources enter unweighted.
        const std::vector<double> uniform(3, 1.0 / 3.0);
        result = train_baseline(net, bundle, uniform, train_config);
    } else {
        const auto weights = load_weights_file(config, paths);
        result = train(net, bundle, weights, train_config);
    }

    CheckpointInfo info;
    info.config = net_config;
    info.seed = config.seed();
    info.step_count = result.steps_taken;
    info.config_hash = config.hash();
    save_checkpoint(paths.checkpoint(baseline), info, result.params);
    write_training_log(paths.train_log(baseline), result.log);
}

void stage_evaluate(const PipelineConfig& config, const RunPaths& paths) {
    const auto bundle = load_dataset_checked(config, paths);
    const auto params = load_checkpoint_checked(config, paths, false);
    Network<float> net(config.network_config());

    std::vector<EvalReport> reports;
    std::vector<EvalSample> pooled;
    for (const auto& d : bundle.sources) {
        std::vector<EvalSample> samples;
        for (const auto& s : d.samples) {
            if (s.split != Split::Test) continue;
            EvalSample e;
            e.x = sample_to_input<float>(s, d.length);
            e.label = s.label;
            samples.push_back(e);
            pooled.push_back(std::move(e));
        }
        reports.push_back(evaluate(net, params, d.domain_id + "_test", samples));
    }
    reports.push_back(evaluate(net, params, "source_pooled_test", pooled));
    const auto eval_labels = load_eval_labels(paths.dataset());
    reports.push_back(evaluate(net, params, "target_story1", target_samples(bundle, eval_labels)));
    emit_report(reports, paths.eval_dir());
}

void stage_compare(const PipelineConfig& config, const RunPaths& paths) {
    const auto bundle = load_dataset_checked(config, paths);
    const auto baseline = load_checkpoint_checked(config, paths, true);
    const auto adapted = load_checkpoint_checked(config, paths, false);
    Network<float> net(config.network_config());
    const auto eval_labels = load_eval_labels(paths.dataset());
    const auto report = compare_models(net, baseline, adapted, bundle, eval_labels);
    std::filesystem::create_directories(paths.eval_dir());
    emit_comparison(report, paths.comparison());
}

void stage_pipeline(const PipelineConfig& config, const RunPaths& paths) {
    stage_simulate(config, paths);
    stage_build_dataset(config, paths);
    stage_weights(config, paths);
    stage_train(config, paths, false);
    stage_train(config, paths, true);
    stage_evaluate(config, paths);
    stage_compare(config, paths);
}

}  // namespace driftadapt
