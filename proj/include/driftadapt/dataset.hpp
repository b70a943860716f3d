#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "driftadapt/archive.hpp"

namespace driftadapt {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct FeatureSample {
    std::vector<float> x;  // length x 4 row-major, channels [lower_x, lower_y, upper_x, upper_y]
    int label = 0;         // damage class 1..3; 0 = absent (target)
    Split split = Split::Train;
    std::string record_id;
};

// Per-channel standardization statistics, computed once from the pooled
// source training split and applied to every domain.
struct ChannelStats {
    std::array<double, 4> mean{};
    std::array<double, 4> stddev{};
};

struct DomainDataset {
    std::string domain_id;
    bool is_source = false;
    double physics = 0.0;  // relative height: story / n_stories
    std::size_t story = 0;
    std::size_t length = 0;  // L
    double rate = 0.0;
    ChannelStats stats;
    std::vector<FeatureSample> samples;

    std::size_t count_in_split(Split s) const;
};

struct DatasetBundle {
    std::vector<DomainDataset> sources;  // one per source story
    DomainDataset target;                // unlabeled
    ChannelStats stats;
    std::string config_hash;
    std::uint64_t seed = 0;
};

struct DatasetConfig {
    std::size_t length = 2048;
    double rate = 50.0;  // Hz
    double val_fraction = 0.15;
    double test_fraction = 0.15;
    std::uint64_t seed = 0;
    std::string config_hash;
};

struct BuiltDomains {
    DatasetBundle bundle;
    std::vector<std::uint8_t> target_eval_labels;  // quarantined; persisted separately
};

// Sources = every story of the (three-story) source archive; target =
// story 1 of the target archive. Labels attach to sources only; target
// labels are computed but returned on the side for the evaluation file.
BuiltDomains build_domains(const ResponseArchiveReader& source_archive,
                           const ResponseArchiveReader& target_archive, const DatasetConfig& config);

// Per-class proportions (classes 1..3) of a labeled dataset.
std::array<double, 3> class_distribution(const DomainDataset& dataset);

void save_dataset(const DatasetBundle& bundle, const std::vector<std::uint8_t>& target_eval_labels,
                  const std::filesystem::path& dir);

// Loads the training-facing bundle; target labels stay on disk.
DatasetBundle load_dataset(const std::filesystem::path& dir);

// Evaluation-only: reads the quarantined target labels.
std::vector<std::uint8_t> load_eval_labels(const std::filesystem::path& dir);

}  // namespace driftadapt
