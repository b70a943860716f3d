#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "driftadapt/dataset.hpp"
#include "driftadapt/network.hpp"
#include "driftadapt/physics_weights.hpp"

namespace driftadapt {

enum class LambdaMode { Ramp, Constant };

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;  // per domain per step
    int epochs = 30;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;  // per parameter group
    LambdaMode lambda_mode = LambdaMode::Ramp;
    double lambda_constant = 0.0;
    int early_stop_patience = 5;

    void validate() const;
};

// 2/(1+exp(-10p)) - 1 on p in [0,1]; rises from 0 toward (but never
// reaching) 1.
double lambda_schedule(double progress);

// Value-level loss surfaces; the training path computes the same
// quantities through Network::gradients.

struct LabeledPosterior {
    std::vector<double> p;  // class posterior
    int label = 0;          // zero-based true class
    int source = 0;         // source-domain index
};

// sum_i w_i * mean over source-i samples of (-log p_true); posteriors at
// the true class are clamped at 1e-12 (sets *clamped when hit).
double classification_loss(const std::vector<LabeledPosterior>& posteriors,
                           const std::vector<double>& weights, bool* clamped = nullptr);

struct AdversarialScores {
    // [i] = discriminator-i scores on its own source / on the target
    std::vector<std::vector<double>> source_scores;
    std::vector<std::vector<double>> target_scores;
};

// Per-source loss = mean(-log d) over S_i + mean(-log(1-d)) over T;
// returns the per-source losses and their weighted sum in a breakdown
// fragment. Scores are clamped 1e-12 away from {0, 1}.
LossBreakdown adversarial_loss(const AdversarialScores& scores, const std::vector<double>& weights,
                               bool* clamped = nullptr);

// Adam with per-group gradient-norm clipping. Group 0 holds the extractor
// and classifier; each discriminator clips on its own.
template <typename S>
struct AdamState {
    std::vector<std::vector<S>> m;
    std::vector<std::vector<S>> v;
    std::int64_t t = 0;

    static AdamState zero_like(const ParameterStoreT<S>& params);
};

template <typename S>
void adam_update(ParameterStoreT<S>& params, const ParameterStoreT<S>& grads, AdamState<S>& state,
                 const TrainConfig& cfg);

// One optimizer step on a combined batch (B samples per source plus B
// target samples, none for pure supervised training). Throws NumericError
// before touching params if any loss is non-finite.
template <typename S>
LossBreakdown train_step(const Network<S>& net, ParameterStoreT<S>& params, AdamState<S>& state,
                         const std::vector<BatchSample<S>>& batch, const std::vector<double>& weights,
                         double lambda, const TrainConfig& cfg);

struct EpochLogEntry {
    int epoch = 0;
    int steps = 0;
    double clv = 0.0;
    std::vector<double> domain;
    double adv = 0.0;
    double lambda = 0.0;  // at the last step of the epoch
    double val_accuracy = 0.0;
};

struct TrainingLog {
    std::vector<EpochLogEntry> epochs;
};

void write_training_log(const std::filesystem::path& path, const TrainingLog& log);
TrainingLog read_training_log(const std::filesystem::path& path);

template <typename S>
struct TrainResult {
    ParameterStoreT<S> params;
    TrainingLog log;
    std::uint64_t steps_taken = 0;
};

// Full adversarial routine: epoch loop over shuffled per-domain batch
// streams, lambda on global progress, early stopping on source-validation
// accuracy (best parameters are returned). An empty target domain reduces
// to supervised training on the sources.
template <typename S>
TrainResult<S> train(const Network<S>& net, const DatasetBundle& data, const std::vector<double>& weights,
                     const TrainConfig& cfg);

// Source-only reference model: discriminators and target removed,
// lambda identically zero.
template <typename S>
TrainResult<S> train_baseline(const Network<S>& net, const DatasetBundle& data,
                              const std::vector<double>& weights, const TrainConfig& cfg);

// channels x length network input from a stored sample.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> sample_to_input(const FeatureSample& sample,
                                                                 std::size_t length);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace driftadapt
