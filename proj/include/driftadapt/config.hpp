#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftadapt/building.hpp"
#include "driftadapt/dataset.hpp"
#include "driftadapt/ground_motion.hpp"
#include "driftadapt/network.hpp"
#include "driftadapt/physics_weights.hpp"
#include "driftadapt/trainer.hpp"

namespace driftadapt {

struct MotionCampaignConfig {
    std::size_t n_motions = 60;
    double duration = 40.96;  // s
    double dt = 0.01;         // s
    SpectralParams spectral;
    std::vector<double> target_pga;  // m/s^2, one scaled record per value
};

// The validated pipeline configuration. Every run artifact records
// hash(); stages refuse inputs produced under a different hash.
class PipelineConfig {
public:
    static PipelineConfig defaults();

    // Overlays the user file (if any) and dot-path overrides onto the
    // defaults; rejects unknown keys and type mismatches with a
    // field-level SchemaError.
    static PipelineConfig load(const std::optional<std::filesystem::path>& file,
                               const std::vector<std::string>& overrides,
                               std::optional<std::uint64_t> seed_override);

    std::uint64_t seed() const;
    std::string hash() const;  // crc32 of the canonical serialization

    MotionCampaignConfig campaign() const;
    BuildingSpec source_building() const;
    BuildingSpec target_building() const;
    DatasetConfig dataset_config() const;  // seed/config_hash filled in
    SigmaMode sigma_mode() const;
    double sigma_fixed() const;
    NetworkConfig network_config() const;
    TrainConfig train_config() const;

    const nlohmann::json& raw() const { return raw_; }

private:
    explicit PipelineConfig(nlohmann::json raw) : raw_(std::move(raw)) {}
    nlohmann::json raw_;
};

// Rejects keys absent from the schema (the default config tree) and
// values of mismatched type; message carries the dot path.
void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& value,
                             const std::string& path);

// "a.b.c=value" with a JSON-parsed value (bare strings allowed).
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace driftadapt
