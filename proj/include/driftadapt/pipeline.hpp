#pragma once

#include <filesystem>

#include "driftadapt/config.hpp"
#include "driftadapt/physics_weights.hpp"

namespace driftadapt {

// Every stage writes inside one run directory named by config hash and
// seed; nothing escapes it.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path source_archive() const { return root / "sim" / "source_building"; }
    std::filesystem::path target_archive() const { return root / "sim" / "target_building"; }
    std::filesystem::path dataset() const { return root / "dataset"; }
    std::filesystem::path weights_json() const { return root / "weights.json"; }
    std::filesystem::path checkpoint(bool baseline) const {
        return root / "train" / (baseline ? "baseline" : "adapted");
    }
    std::filesystem::path train_log(bool baseline) const {
        return checkpoint(baseline) / "log.jsonl";
    }
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path comparison() const { return eval_dir() / "comparison.json"; }
};

RunPaths make_run_paths(const PipelineConfig& config, const std::filesystem::path& out_root);

void stage_simulate(const PipelineConfig& config, const RunPaths& paths);
void stage_build_dataset(const PipelineConfig& config, const RunPaths& paths);
SourceWeightSet stage_weights(const PipelineConfig& config, const RunPaths& paths);
void stage_train(const PipelineConfig& config, const RunPaths& paths, bool baseline);
void stage_evaluate(const PipelineConfig& config, const RunPaths& paths);
void stage_compare(const PipelineConfig& config, const RunPaths& paths);
void stage_pipeline(const PipelineConfig& config, const RunPaths& paths);

}  // namespace driftadapt
