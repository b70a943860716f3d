#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "driftadapt/dataset.hpp"
#include "driftadapt/network.hpp"

namespace driftadapt {

struct EvalReport {
    std::string domain_id;
    std::size_t n_samples = 0;
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
    double accuracy = 0.0;  // trace / total
    double macro_f1 = 0.0;

    static EvalReport from_confusion(std::string domain_id,
                                     const std::array<std::array<std::size_t, 3>, 3>& confusion);
};

// One labeled sample for scoring: network input plus true class (1..3).
struct EvalSample {
    Eigen::MatrixXf x;  // channels x length
    int label = 0;
};

// Argmax of the class posterior per sample; ties break toward the lower
// class index.
EvalReport evaluate(const Network<float>& net, const ParameterStore& params,
                    const std::string& domain_id, const std::vector<EvalSample>& samples);

// Labeled evaluation sets drawn from a dataset bundle.
std::vector<EvalSample> source_split_samples(const DatasetBundle& data, Split split);
std::vector<EvalSample> target_samples(const DatasetBundle& data,
                                       const std::vector<std::uint8_t>& eval_labels);

struct ComparisonReport {
    EvalReport baseline_source, baseline_target;
    EvalReport adapted_source, adapted_target;
    double target_accuracy_delta = 0.0;  // adapted - baseline
};

ComparisonReport compare_models(const Network<float>& net, const ParameterStore& baseline,
                                const ParameterStore& adapted, const DatasetBundle& data,
                                const std::vector<std::uint8_t>& target_eval_labels);

// report.json / comparison.json plus one confusion_<domain>.csv per
// report; deterministic content.
void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& dir);
void emit_comparison(const ComparisonReport& report, const std::filesystem::path& path);
std::vector<EvalReport> parse_report(const std::filesystem::path& path);
ComparisonReport parse_comparison(const std::filesystem::path& path);

}  // namespace driftadapt
