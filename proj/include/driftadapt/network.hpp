#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace driftadapt {

struct ConvBlockConfig {
    int kernel = 3;    // odd
    int channels = 16;
    int pool = 4;
};

// Geometry of the shared extractor, the damage classifier, and the
// per-source domain discriminators. The latent dimension is always twice
// the recurrent hidden size (both directions' final states concatenated).
struct NetworkConfig {
    int input_length = 2048;
    int input_channels = 4;
    std::vector<ConvBlockConfig> conv_blocks = {{7, 16, 4}, {5, 32, 4}, {3, 64, 4}};
    int recurrent_hidden = 64;
    int classifier_hidden = 64;
    int discriminator_hidden = 64;
    int n_classes = 3;
    int n_sources = 3;

    int latent_dim() const { return 2 * recurrent_hidden; }
    int recurrent_steps() const;
    int recurrent_input_channels() const;
    void validate() const;  // throws std::invalid_argument
};

template <typename S>
struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<S> data;

    std::size_t size() const { return data.size(); }
};

template <typename S>
struct ParameterStoreT {
    std::vector<NamedArray<S>> arrays;  // fixed, config-determined order

    NamedArray<S>& at(const std::string& name);
    const NamedArray<S>& at(const std::string& name) const;
    bool has(const std::string& name) const;

    template <typename T>
    ParameterStoreT<T> cast() const {
        ParameterStoreT<T> out;
        out.arrays.reserve(arrays.size());
        for (const auto& a : arrays) {
            NamedArray<T> b;
            b.name = a.name;
            b.shape = a.shape;
            b.data.reserve(a.data.size());
            for (S v : a.data) b.data.push_back(static_cast<T>(v));
            out.arrays.push_back(std::move(b));
        }
        return out;
    }
};

using ParameterStore = ParameterStoreT<float>;

// Optimizer clipping group: 0 = extractor + classifier, 1 + i = the i-th
// discriminator.
int param_group_of(const std::string& name);

// One network input with its domain identity. x is channels x length;
// source is the source-domain index or -1 for target; label is the
// zero-based class index or -1 when absent.
template <typename S>
struct BatchSample {
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> x;
    int source = -1;
    int label = -1;
};

struct LossSelector {
    enum class Kind { Classification, Domain, Total };
    Kind kind = Kind::Total;
    int domain_index = 0;          // Domain only
    double grl_lambda = 1.0;       // scales the reversed discriminator->extractor gradient
    std::vector<double> weights;   // per-source weights (Classification, Total)
};

struct LossBreakdown {
    double clv = 0.0;
    std::vector<double> domain;  // per-source adversarial loss
    double adv = 0.0;            // weighted sum of domain losses
    double total = 0.0;          // clv + lambda * adv
    bool clamped = false;        // a posterior/score hit the log clamp
};

template <typename S>
class Network {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    explicit Network(NetworkConfig config);

    const NetworkConfig& config() const { return config_; }

    // Deterministic: fan-in-scaled uniform weights, zero biases, +1
    // recurrent forget-gate bias.
    ParameterStoreT<S> init_params(std::uint64_t seed) const;

    // x is length x 4 (time-major rows), as emitted by the dataset.
    Vec extract(const ParameterStoreT<S>& params, const Mat& x) const;
    Vec predict(const ParameterStoreT<S>& params, const Vec& z) const;
    S discriminate(const ParameterStoreT<S>& params, int source_index, const Vec& z) const;

    // Posterior per sample, n_classes x batch; extractor + classifier only.
    Mat posteriors(const ParameterStoreT<S>& params, const std::vector<Mat>& x_batch) const;

    LossBreakdown loss_value(const ParameterStoreT<S>& params, const std::vector<BatchSample<S>>& batch,
                             const LossSelector& selector) const;

    // Reverse-mode gradients of the selected loss for every parameter
    // array, shape-congruent with the store. The gradient flowing from
    // each discriminator into the extractor is multiplied by
    // -selector.grl_lambda (gradient reversal); discriminator parameters
    // receive their unreversed descent gradient.
    std::pair<ParameterStoreT<S>, LossBreakdown> gradients(const ParameterStoreT<S>& params,
                                                           const std::vector<BatchSample<S>>& batch,
                                                           const LossSelector& selector) const;

private:
    NetworkConfig config_;
};

// Gradient reversal layer. Forward is the identity; backward multiplies
// the upstream gradient by -lambda elementwise.
template <typename S>
std::vector<S> grl_forward(const std::vector<S>& x);
template <typename S>
std::vector<S> grl_backward(const std::vector<S>& upstream, double lambda);

struct CheckpointInfo {
    NetworkConfig config;
    std::uint64_t seed = 0;
    std::uint64_t step_count = 0;
    std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& dir, const CheckpointInfo& info,
                     const ParameterStore& params);
std::pair<CheckpointInfo, ParameterStore> load_checkpoint(const std::filesystem::path& dir);

extern template struct ParameterStoreT<float>;
extern template struct ParameterStoreT<double>;
extern template class Network<float>;
extern template class Network<double>;
extern template std::vector<float> grl_forward(const std::vector<float>&);
extern template std::vector<double> grl_forward(const std::vector<double>&);
extern template std::vector<float> grl_backward(const std::vector<float>&, double);
extern template std::vector<double> grl_backward(const std::vector<double>&, double);

}  // namespace driftadapt
