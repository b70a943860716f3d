#include "driftadapt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/rng.hpp"

namespace driftadapt {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip norm must be > 0");
    if (lambda_constant < 0.0 || lambda_constant >= 1.0) {
        throw std::invalid_argument("constant lambda must lie in [0, 1)");
    }
    if (early_stop_patience < 1) throw std::invalid_argument("patience must be >= 1");
}

double lambda_schedule(double progress) {
    if (!(progress >= 0.0) || progress > 1.0) {
        throw std::invalid_argument("schedule progress must lie in [0, 1]");
    }
    return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0;
}

namespace {

constexpr double kLogClamp = 1e-12;

double clamped_log(double p, bool* clamped) {
    if (p < kLogClamp) {
        p = kLogClamp;
        if (clamped != nullptr) *clamped = true;
    }
    return std::log(p);
}

}  // namespace

double classification_loss(const std::vector<LabeledPosterior>& posteriors,
                           const std::vector<double>& weights, bool* clamped) {
    if (posteriors.empty()) throw std::invalid_argument("no posteriors given");
    std::vector<double> sums(weights.size(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    for (const auto& s : posteriors) {
        if (s.source < 0 || s.source >= static_cast<int>(weights.size())) {
            throw std::invalid_argument("posterior carries an out-of-range source index");
        }
        if (s.label < 0 || s.label >= static_cast<int>(s.p.size())) {
            throw std::invalid_argument("posterior carries an out-of-range label");
        }
        sums[static_cast<std::size_t>(s.source)] -= clamped_log(s.p[static_cast<std::size_t>(s.label)], clamped);
        counts[static_cast<std::size_t>(s.source)]++;
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (counts[i] > 0) loss += weights[i] * sums[i] / static_cast<double>(counts[i]);
    }
    return loss;
}

LossBreakdown adversarial_loss(const AdversarialScores& scores, const std::vector<double>& weights,
                               bool* clamped) {
    if (scores.source_scores.size() != weights.size() || scores.target_scores.size() != weights.size()) {
        throw std::invalid_argument("score groups must match the weight count");
    }
    LossBreakdown b;
    b.domain.assign(weights.size(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& pos = scores.source_scores[i];
        const auto& neg = scores.target_scores[i];
        if (pos.empty() || neg.empty()) {
            throw std::invalid_argument("domain " + std::to_string(i + 1) +
                                        " needs both source and target scores");
        }
        double loss = 0.0;
        for (double d : pos) loss -= clamped_log(d, clamped) / static_cast<double>(pos.size());
        for (double d : neg) loss -= clamped_log(1.0 - d, clamped) / static_cast<double>(neg.size());
        b.domain[i] = loss;
        b.adv += weights[i] * loss;
    }
    b.total = b.adv;
    if (clamped != nullptr) b.clamped = *clamped;
    return b;
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename S>
AdamState<S> AdamState<S>::zero_like(const ParameterStoreT<S>& params) {
    AdamState<S> state;
    state.m.reserve(params.arrays.size());
    state.v.reserve(params.arrays.size());
    for (const auto& a : params.arrays) {
        state.m.emplace_back(a.data.size(), S(0));
        state.v.emplace_back(a.data.size(), S(0));
    }
    return state;
}

template <typename S>
void adam_update(ParameterStoreT<S>& params, const ParameterStoreT<S>& grads, AdamState<S>& state,
                 const TrainConfig& cfg) {
    if (grads.arrays.size() != params.arrays.size() || state.m.size() != params.arrays.size()) {
        throw std::invalid_argument("gradient/optimizer state not congruent with parameters");
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    // Per-group L2 norms for clipping.
    int max_group = 0;
    for (const auto& a : params.arrays) max_group = std::max(max_group, param_group_of(a.name));
    std::vector<double> sq_norm(static_cast<std::size_t>(max_group) + 1, 0.0);
    for (std::size_t i = 0; i < grads.arrays.size(); ++i) {
        const auto g = static_cast<std::size_t>(param_group_of(grads.arrays[i].name));
        for (S v : grads.arrays[i].data) sq_norm[g] += static_cast<double>(v) * static_cast<double>(v);
    }
    std::vector<double> clip(sq_norm.size(), 1.0);
    for (std::size_t g = 0; g < sq_norm.size(); ++g) {
        const double norm = std::sqrt(sq_norm[g]);
        if (norm > cfg.clip_norm) clip[g] = cfg.clip_norm / norm;
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.arrays.size(); ++i) {
        auto& p = params.arrays[i].data;
        const auto& g_arr = grads.arrays[i].data;
        const auto scale = static_cast<S>(clip[static_cast<std::size_t>(param_group_of(params.arrays[i].name))]);
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const S g = scale * g_arr[k];
            m[k] = static_cast<S>(beta1) * m[k] + static_cast<S>(1.0 - beta1) * g;
            v[k] = static_cast<S>(beta2) * v[k] + static_cast<S>(1.0 - beta2) * g * g;
            const double mhat = static_cast<double>(m[k]) / bc1;
            const double vhat = static_cast<double>(v[k]) / bc2;
            p[k] -= static_cast<S>(cfg.learning_rate * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

template <typename S>
LossBreakdown train_step(const Network<S>& net, ParameterStoreT<S>& params, AdamState<S>& state,
                         const std::vector<BatchSample<S>>& batch, const std::vector<double>& weights,
                         double lambda, const TrainConfig& cfg) {
    bool has_target = false;
    for (const auto& s : batch) has_target = has_target || s.source < 0;

    LossSelector selector;
    selector.weights = weights;
    if (has_target) {
        selector.kind = LossSelector::Kind::Total;
        selector.grl_lambda = lambda;
    } else {
        selector.kind = LossSelector::Kind::Classification;
    }
    auto [grads, breakdown] = net.gradients(params, batch, selector);
    adam_update(params, grads, state, cfg);
    return breakdown;
}

// ---------------------------------------------------------------------------
// Training loops

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> sample_to_input(const FeatureSample& sample,
                                                                 std::size_t length) {
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> x(4, static_cast<Eigen::Index>(length));
    if (sample.x.size() != length * 4) throw std::invalid_argument("sample length mismatch");
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t c = 0; c < 4; ++c) {
            x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
                static_cast<S>(sample.x[t * 4 + c]);
        }
    }
    return x;
}

namespace {

template <typename S>
double source_validation_accuracy(const Network<S>& net, const ParameterStoreT<S>& params,
                                  const std::vector<std::vector<BatchSample<S>>>& val_sets) {
    std::size_t correct = 0, total = 0;
    for (const auto& set : val_sets) {
        for (const auto& s : set) {
            std::vector<typename Network<S>::Mat> xs{s.x};
            const auto p = net.posteriors(params, xs);
            Eigen::Index pred;
            p.col(0).maxCoeff(&pred);
            if (static_cast<int>(pred) == s.label) ++correct;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

template <typename S>
TrainResult<S> train(const Network<S>& net, const DatasetBundle& data, const std::vector<double>& weights,
                     const TrainConfig& cfg) {
    cfg.validate();
    const auto& config = net.config();
    if (static_cast<int>(data.sources.size()) != config.n_sources) {
        throw std::invalid_argument("dataset source count does not match the network");
    }
    if (static_cast<int>(weights.size()) != config.n_sources) {
        throw std::invalid_argument("weight count does not match the network");
    }
    for (const auto& d : data.sources) {
        if (d.samples.empty()) throw std::invalid_argument("empty source domain " + d.domain_id);
    }
    const bool use_target = !data.target.samples.empty();

    // Per-domain training index streams: the train split for sources, the
    // whole domain for the target.
    std::vector<std::vector<std::size_t>> train_idx(data.sources.size());
    for (std::size_t i = 0; i < data.sources.size(); ++i) {
        for (std::size_t k = 0; k < data.sources[i].samples.size(); ++k) {
            if (data.sources[i].samples[k].split == Split::Train) train_idx[i].push_back(k);
        }
        if (train_idx[i].empty()) {
            throw std::invalid_argument("source domain " + data.sources[i].domain_id +
                                        " has no training samples");
        }
    }
    std::vector<std::size_t> target_idx(data.target.samples.size());
    std::iota(target_idx.begin(), target_idx.end(), 0);

    std::size_t steps_per_epoch = std::numeric_limits<std::size_t>::max();
    for (const auto& idx : train_idx) {
        steps_per_epoch = std::min(steps_per_epoch, idx.size() / static_cast<std::size_t>(cfg.batch_size));
    }
    if (use_target) {
        steps_per_epoch =
            std::min(steps_per_epoch, target_idx.size() / static_cast<std::size_t>(cfg.batch_size));
    }

    TrainResult<S> result;
    result.params = net.init_params(cfg.seed);
    if (cfg.epochs == 0) return result;
    if (steps_per_epoch == 0) {
        throw std::invalid_argument("batch size exceeds the smallest domain's training split");
    }

    // Validation sets are fixed across epochs.
    std::vector<std::vector<BatchSample<S>>> val_sets(data.sources.size());
    for (std::size_t i = 0; i < data.sources.size(); ++i) {
        for (const auto& s : data.sources[i].samples) {
            if (s.split != Split::Val) continue;
            BatchSample<S> b;
            b.x = sample_to_input<S>(s, data.sources[i].length);
            b.source = static_cast<int>(i);
            b.label = s.label - 1;
            val_sets[i].push_back(std::move(b));
        }
    }

    AdamState<S> opt = AdamState<S>::zero_like(result.params);
    const double total_steps = static_cast<double>(steps_per_epoch) * static_cast<double>(cfg.epochs);
    std::uint64_t global_step = 0;

    ParameterStoreT<S> best_params = result.params;
    double best_val = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Reshuffle every stream; the derivation keys make the source
        // streams identical whether or not a target is present.
        std::vector<std::vector<std::size_t>> order(train_idx);
        for (std::size_t i = 0; i < order.size(); ++i) {
            Rng rng(derive_seed(cfg.seed, "shuffle",
                                static_cast<std::uint64_t>(epoch) * 16 + static_cast<std::uint64_t>(i)));
            rng.shuffle(order[i]);
        }
        std::vector<std::size_t> target_order(target_idx);
        if (use_target) {
            Rng rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch) * 16 + 15));
            rng.shuffle(target_order);
        }

        EpochLogEntry entry;
        entry.epoch = epoch + 1;
        entry.domain.assign(data.sources.size(), 0.0);
        double lambda = 0.0;

        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const double progress = static_cast<double>(global_step) / total_steps;
            lambda = cfg.lambda_mode == LambdaMode::Ramp ? lambda_schedule(progress) : cfg.lambda_constant;

            std::vector<BatchSample<S>> batch;
            batch.reserve(static_cast<std::size_t>(cfg.batch_size) * (data.sources.size() + 1));
            for (std::size_t i = 0; i < data.sources.size(); ++i) {
                for (int k = 0; k < cfg.batch_size; ++k) {
                    const auto idx = order[i][step * static_cast<std::size_t>(cfg.batch_size) +
                                              static_cast<std::size_t>(k)];
                    const auto& s = data.sources[i].samples[idx];
                    BatchSample<S> b;
                    b.x = sample_to_input<S>(s, data.sources[i].length);
                    b.source = static_cast<int>(i);
                    b.label = s.label - 1;
                    batch.push_back(std::move(b));
                }
            }
            if (use_target) {
                for (int k = 0; k < cfg.batch_size; ++k) {
                    const auto idx = target_order[step * static_cast<std::size_t>(cfg.batch_size) +
                                                  static_cast<std::size_t>(k)];
                    BatchSample<S> b;
                    b.x = sample_to_input<S>(data.target.samples[idx], data.target.length);
                    b.source = -1;
                    batch.push_back(std::move(b));
                }
            }

            const auto breakdown = train_step(net, result.params, opt, batch, weights, lambda, cfg);
            ++global_step;
            entry.clv += breakdown.clv;
            entry.adv += breakdown.adv;
            for (std::size_t i = 0; i < breakdown.domain.size() && i < entry.domain.size(); ++i) {
                entry.domain[i] += breakdown.domain[i];
            }
        }

        const auto steps = static_cast<double>(steps_per_epoch);
        entry.steps = static_cast<int>(steps_per_epoch);
        entry.clv /= steps;
        entry.adv /= steps;
        for (auto& d : entry.domain) d /= steps;
        entry.lambda = lambda;
        entry.val_accuracy = source_validation_accuracy(net, result.params, val_sets);
        result.log.epochs.push_back(entry);

        if (entry.val_accuracy > best_val) {
            best_val = entry.val_accuracy;
            best_params = result.params;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.early_stop_patience) break;
        }
    }

    result.params = std::move(best_params);
    result.steps_taken = global_step;
    return result;
}

template <typename S>
TrainResult<S> train_baseline(const Network<S>& net, const DatasetBundle& data,
                              const std::vector<double>& weights, const TrainConfig& cfg) {
    DatasetBundle sources_only = data;
    sources_only.target.samples.clear();
    TrainConfig baseline_cfg = cfg;
    baseline_cfg.lambda_mode = LambdaMode::Constant;
    baseline_cfg.lambda_constant = 0.0;
    return train(net, sources_only, weights, baseline_cfg);
}

// ---------------------------------------------------------------------------
// Log persistence (JSON lines, one record per epoch)

void write_training_log(const std::filesystem::path& path, const TrainingLog& log) {
    std::ostringstream out;
    for (const auto& e : log.epochs) {
        json j{{"epoch", e.epoch},     {"steps", e.steps},   {"clv", e.clv},
               {"domain", e.domain},   {"adv", e.adv},       {"lambda", e.lambda},
               {"val_accuracy", e.val_accuracy}};
        out << j.dump() << "\n";
    }
    write_text_file(path, out.str());
}

TrainingLog read_training_log(const std::filesystem::path& path) {
    TrainingLog log;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        EpochLogEntry e;
        e.epoch = j.at("epoch").get<int>();
        e.steps = j.at("steps").get<int>();
        e.clv = j.at("clv").get<double>();
        e.domain = j.at("domain").get<std::vector<double>>();
        e.adv = j.at("adv").get<double>();
        e.lambda = j.at("lambda").get<double>();
        e.val_accuracy = j.at("val_accuracy").get<double>();
        log.epochs.push_back(std::move(e));
    }
    return log;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_update(ParameterStoreT<float>&, const ParameterStoreT<float>&, AdamState<float>&,
                          const TrainConfig&);
template void adam_update(ParameterStoreT<double>&, const ParameterStoreT<double>&, AdamState<double>&,
                          const TrainConfig&);
template LossBreakdown train_step(const Network<float>&, ParameterStoreT<float>&, AdamState<float>&,
                                  const std::vector<BatchSample<float>>&, const std::vector<double>&,
                                  double, const TrainConfig&);
template LossBreakdown train_step(const Network<double>&, ParameterStoreT<double>&, AdamState<double>&,
                                  const std::vector<BatchSample<double>>&, const std::vector<double>&,
                                  double, const TrainConfig&);
template TrainResult<float> train(const Network<float>&, const DatasetBundle&,
                                  const std::vector<double>&, const TrainConfig&);
template TrainResult<double> train(const Network<double>&, const DatasetBundle&,
                                   const std::vector<double>&, const TrainConfig&);
template TrainResult<float> train_baseline(const Network<float>&, const DatasetBundle&,
                                           const std::vector<double>&, const TrainConfig&);
template TrainResult<double> train_baseline(const Network<double>&, const DatasetBundle&,
                                            const std::vector<double>&, const TrainConfig&);
template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> sample_to_input<float>(const FeatureSample&,
                                                                                     std::size_t);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> sample_to_input<double>(
    const FeatureSample&, std::size_t);

}  // namespace driftadapt
