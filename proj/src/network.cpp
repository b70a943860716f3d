#include "driftadapt/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string_view>

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/rng.hpp"

namespace driftadapt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

int NetworkConfig::recurrent_steps() const {
    int t = input_length;
    for (const auto& b : conv_blocks) t /= b.pool;
    return t;
}

int NetworkConfig::recurrent_input_channels() const {
    return conv_blocks.empty() ? input_channels : conv_blocks.back().channels;
}

void NetworkConfig::validate() const {
    if (input_length < 2) throw std::invalid_argument("input_length must be >= 2");
    if (input_channels < 1) throw std::invalid_argument("input_channels must be >= 1");
    for (const auto& b : conv_blocks) {
        if (b.kernel < 1 || b.kernel % 2 == 0) {
            throw std::invalid_argument("conv kernels must be odd and >= 1");
        }
        if (b.channels < 1) throw std::invalid_argument("conv channels must be >= 1");
        if (b.pool < 1) throw std::invalid_argument("pool width must be >= 1");
    }
    if (recurrent_hidden < 1) throw std::invalid_argument("recurrent_hidden must be >= 1");
    if (classifier_hidden < 1 || discriminator_hidden < 1) {
        throw std::invalid_argument("head hidden widths must be >= 1");
    }
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    if (n_sources < 1) throw std::invalid_argument("n_sources must be >= 1");
    if (recurrent_steps() < 4) {
        throw std::invalid_argument("conv/pool geometry must leave at least 4 recurrent steps");
    }
}

// ---------------------------------------------------------------------------
// Parameter store

template <typename S>
NamedArray<S>& ParameterStoreT<S>::at(const std::string& name) {
    for (auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::invalid_argument("no parameter array named " + name);
}

template <typename S>
const NamedArray<S>& ParameterStoreT<S>::at(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::invalid_argument("no parameter array named " + name);
}

template <typename S>
bool ParameterStoreT<S>::has(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return true;
    }
    return false;
}

int param_group_of(const std::string& name) {
    constexpr std::string_view prefix = "discriminator";
    if (name.rfind(prefix, 0) == 0) {
        const std::size_t digits_end = name.find('.', prefix.size());
        const int idx = std::stoi(name.substr(prefix.size(), digits_end - prefix.size()));
        return idx;  // discriminators are numbered from 1
    }
    return 0;
}

namespace {

enum class InitRule { FanInUniform, Zero, LstmBias };

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    InitRule rule;
    int fan_in = 0;
};

std::vector<ParamSpec> param_specs(const NetworkConfig& cfg) {
    std::vector<ParamSpec> specs;
    int ch = cfg.input_channels;
    for (std::size_t i = 0; i < cfg.conv_blocks.size(); ++i) {
        const auto& b = cfg.conv_blocks[i];
        const std::string base = "extractor.conv" + std::to_string(i + 1);
        specs.push_back({base + ".weight", {b.channels, ch, b.kernel}, InitRule::FanInUniform, ch * b.kernel});
        specs.push_back({base + ".bias", {b.channels}, InitRule::Zero, 0});
        ch = b.channels;
    }
    const int h = cfg.recurrent_hidden;
    for (const char* dir : {"fw", "bw"}) {
        const std::string base = std::string("extractor.lstm.") + dir;
        specs.push_back({base + ".weight_x", {4 * h, ch}, InitRule::FanInUniform, ch});
        specs.push_back({base + ".weight_h", {4 * h, h}, InitRule::FanInUniform, h});
        specs.push_back({base + ".bias", {4 * h}, InitRule::LstmBias, 0});
    }
    const int d = cfg.latent_dim();
    specs.push_back({"classifier.hidden.weight", {cfg.classifier_hidden, d}, InitRule::FanInUniform, d});
    specs.push_back({"classifier.hidden.bias", {cfg.classifier_hidden}, InitRule::Zero, 0});
    specs.push_back({"classifier.out.weight", {cfg.n_classes, cfg.classifier_hidden},
                     InitRule::FanInUniform, cfg.classifier_hidden});
    specs.push_back({"classifier.out.bias", {cfg.n_classes}, InitRule::Zero, 0});
    for (int i = 1; i <= cfg.n_sources; ++i) {
        const std::string base = "discriminator" + std::to_string(i);
        specs.push_back({base + ".hidden.weight", {cfg.discriminator_hidden, d}, InitRule::FanInUniform, d});
        specs.push_back({base + ".hidden.bias", {cfg.discriminator_hidden}, InitRule::Zero, 0});
        specs.push_back({base + ".out.weight", {1, cfg.discriminator_hidden}, InitRule::FanInUniform,
                         cfg.discriminator_hidden});
        specs.push_back({base + ".out.bias", {1}, InitRule::Zero, 0});
    }
    return specs;
}

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

// ---------------------------------------------------------------------------
// Dense views over the flat named arrays. Parameter blobs are row-major;
// weights are copied into column-major Eigen matrices once per call.

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MapRM = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename S>
Mat<S> as_matrix(const NamedArray<S>& a, int rows, int cols) {
    return MapRM<S>(a.data.data(), rows, cols);
}

template <typename S>
Vec<S> as_vector(const NamedArray<S>& a) {
    return Eigen::Map<const Vec<S>>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

template <typename S>
struct HeadWeights {
    Mat<S> w1;
    Vec<S> b1;
    Mat<S> w2;
    Vec<S> b2;
};

template <typename S>
struct LstmWeights {
    Mat<S> wx;
    Mat<S> wh;
    Vec<S> b;
};

template <typename S>
struct Weights {
    struct Conv {
        Mat<S> w;  // Cout x (Cin*K)
        Vec<S> b;
        int kernel;
        int pool;
    };
    std::vector<Conv> conv;
    LstmWeights<S> fw, bw;
    HeadWeights<S> classifier;
    std::vector<HeadWeights<S>> disc;
};

template <typename S>
HeadWeights<S> unpack_head(const ParameterStoreT<S>& p, const std::string& base, int hidden, int in,
                           int out) {
    return {as_matrix(p.at(base + ".hidden.weight"), hidden, in), as_vector(p.at(base + ".hidden.bias")),
            as_matrix(p.at(base + ".out.weight"), out, hidden), as_vector(p.at(base + ".out.bias"))};
}

template <typename S>
Weights<S> unpack(const NetworkConfig& cfg, const ParameterStoreT<S>& p) {
    Weights<S> w;
    int ch = cfg.input_channels;
    for (std::size_t i = 0; i < cfg.conv_blocks.size(); ++i) {
        const auto& b = cfg.conv_blocks[i];
        const std::string base = "extractor.conv" + std::to_string(i + 1);
        w.conv.push_back({as_matrix(p.at(base + ".weight"), b.channels, ch * b.kernel),
                          as_vector(p.at(base + ".bias")), b.kernel, b.pool});
        ch = b.channels;
    }
    const int h = cfg.recurrent_hidden;
    w.fw = {as_matrix(p.at("extractor.lstm.fw.weight_x"), 4 * h, ch),
            as_matrix(p.at("extractor.lstm.fw.weight_h"), 4 * h, h),
            as_vector(p.at("extractor.lstm.fw.bias"))};
    w.bw = {as_matrix(p.at("extractor.lstm.bw.weight_x"), 4 * h, ch),
            as_matrix(p.at("extractor.lstm.bw.weight_h"), 4 * h, h),
            as_vector(p.at("extractor.lstm.bw.bias"))};
    w.classifier = unpack_head(p, "classifier", cfg.classifier_hidden, cfg.latent_dim(), cfg.n_classes);
    for (int i = 1; i <= cfg.n_sources; ++i) {
        w.disc.push_back(unpack_head(p, "discriminator" + std::to_string(i), cfg.discriminator_hidden,
                                     cfg.latent_dim(), 1));
    }
    return w;
}

// Gradient accumulators mirroring Weights; flattened back into a store at
// the end of a backward pass.
template <typename S>
struct GradBuffers {
    std::vector<Mat<S>> conv_w;
    std::vector<Vec<S>> conv_b;
    Mat<S> fw_wx, fw_wh, bw_wx, bw_wh;
    Vec<S> fw_b, bw_b;
    Mat<S> cls_w1, cls_w2;
    Vec<S> cls_b1, cls_b2;
    std::vector<Mat<S>> disc_w1, disc_w2;
    std::vector<Vec<S>> disc_b1, disc_b2;

    static GradBuffers zero(const Weights<S>& w) {
        GradBuffers g;
        for (const auto& c : w.conv) {
            g.conv_w.push_back(Mat<S>::Zero(c.w.rows(), c.w.cols()));
            g.conv_b.push_back(Vec<S>::Zero(c.b.size()));
        }
        g.fw_wx = Mat<S>::Zero(w.fw.wx.rows(), w.fw.wx.cols());
        g.fw_wh = Mat<S>::Zero(w.fw.wh.rows(), w.fw.wh.cols());
        g.fw_b = Vec<S>::Zero(w.fw.b.size());
        g.bw_wx = Mat<S>::Zero(w.bw.wx.rows(), w.bw.wx.cols());
        g.bw_wh = Mat<S>::Zero(w.bw.wh.rows(), w.bw.wh.cols());
        g.bw_b = Vec<S>::Zero(w.bw.b.size());
        g.cls_w1 = Mat<S>::Zero(w.classifier.w1.rows(), w.classifier.w1.cols());
        g.cls_b1 = Vec<S>::Zero(w.classifier.b1.size());
        g.cls_w2 = Mat<S>::Zero(w.classifier.w2.rows(), w.classifier.w2.cols());
        g.cls_b2 = Vec<S>::Zero(w.classifier.b2.size());
        for (const auto& d : w.disc) {
            g.disc_w1.push_back(Mat<S>::Zero(d.w1.rows(), d.w1.cols()));
            g.disc_b1.push_back(Vec<S>::Zero(d.b1.size()));
            g.disc_w2.push_back(Mat<S>::Zero(d.w2.rows(), d.w2.cols()));
            g.disc_b2.push_back(Vec<S>::Zero(d.b2.size()));
        }
        return g;
    }
};

template <typename S>
void store_matrix(ParameterStoreT<S>& store, const std::string& name, const Mat<S>& m) {
    auto& a = store.at(name);
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), m.rows(), m.cols()) = m;
}

template <typename S>
void store_vector(ParameterStoreT<S>& store, const std::string& name, const Vec<S>& v) {
    auto& a = store.at(name);
    Eigen::Map<Vec<S>>(a.data.data(), v.size()) = v;
}

// ---------------------------------------------------------------------------
// Elementwise helpers

template <typename S>
S stable_sigmoid(S x) {
    if (x >= S(0)) {
        const S e = std::exp(-x);
        return S(1) / (S(1) + e);
    }
    const S e = std::exp(x);
    return e / (S(1) + e);
}

template <typename S>
Vec<S> sigmoid_vec(const Vec<S>& x) {
    return x.unaryExpr([](S v) { return stable_sigmoid(v); });
}

template <typename S>
Vec<S> softmax_vec(const Vec<S>& logits) {
    const S m = logits.maxCoeff();
    Vec<S> e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

// ---------------------------------------------------------------------------
// Convolution blocks

template <typename S>
Mat<S> im2col(const Mat<S>& in, int kernel) {
    const int c_in = static_cast<int>(in.rows());
    const int t_len = static_cast<int>(in.cols());
    const int pad = (kernel - 1) / 2;
    Mat<S> cols = Mat<S>::Zero(static_cast<Eigen::Index>(c_in) * kernel, t_len);
    for (int c = 0; c < c_in; ++c) {
        for (int k = 0; k < kernel; ++k) {
            const int off = k - pad;
            const int t0 = std::max(0, -off);
            const int t1 = std::min(t_len, t_len - off);
            if (t1 > t0) {
                cols.row(c * kernel + k).segment(t0, t1 - t0) = in.row(c).segment(t0 + off, t1 - t0);
            }
        }
    }
    return cols;
}

template <typename S>
void col2im_add(const Mat<S>& dcols, int kernel, Mat<S>& din) {
    const int c_in = static_cast<int>(din.rows());
    const int t_len = static_cast<int>(din.cols());
    const int pad = (kernel - 1) / 2;
    for (int c = 0; c < c_in; ++c) {
        for (int k = 0; k < kernel; ++k) {
            const int off = k - pad;
            const int t0 = std::max(0, -off);
            const int t1 = std::min(t_len, t_len - off);
            if (t1 > t0) {
                din.row(c).segment(t0 + off, t1 - t0) += dcols.row(c * kernel + k).segment(t0, t1 - t0);
            }
        }
    }
}

template <typename S>
struct ConvCache {
    Mat<S> input;                // Cin x Tin
    Mat<S> pre;                  // Cout x Tin, before the rectifier
    Mat<S> pooled;               // Cout x Tout
    Eigen::MatrixXi argmax;      // column index into pre, per pooled entry
};

template <typename S>
void conv_block_forward(const typename Weights<S>::Conv& w, const Mat<S>& in, ConvCache<S>& cache) {
    cache.input = in;
    const Mat<S> cols = im2col(in, w.kernel);
    cache.pre = (w.w * cols).colwise() + w.b;
    const int c_out = static_cast<int>(cache.pre.rows());
    const int t_in = static_cast<int>(cache.pre.cols());
    const int t_out = t_in / w.pool;
    cache.pooled.resize(c_out, t_out);
    cache.argmax.resize(c_out, t_out);
    for (int c = 0; c < c_out; ++c) {
        for (int j = 0; j < t_out; ++j) {
            int best = j * w.pool;
            S best_v = std::max(cache.pre(c, best), S(0));
            for (int t = j * w.pool + 1; t < (j + 1) * w.pool; ++t) {
                const S v = std::max(cache.pre(c, t), S(0));
                if (v > best_v) {
                    best_v = v;
                    best = t;
                }
            }
            cache.pooled(c, j) = best_v;
            cache.argmax(c, j) = best;
        }
    }
}

template <typename S>
Mat<S> conv_block_backward(const typename Weights<S>::Conv& w, const ConvCache<S>& cache,
                           const Mat<S>& dpooled, Mat<S>& dw, Vec<S>& db) {
    const int c_out = static_cast<int>(cache.pre.rows());
    const int t_in = static_cast<int>(cache.pre.cols());
    Mat<S> dpre = Mat<S>::Zero(c_out, t_in);
    for (int c = 0; c < c_out; ++c) {
        for (int j = 0; j < dpooled.cols(); ++j) {
            const int t = cache.argmax(c, j);
            if (cache.pre(c, t) > S(0)) dpre(c, t) += dpooled(c, j);
        }
    }
    const Mat<S> cols = im2col(cache.input, w.kernel);
    dw += dpre * cols.transpose();
    db += dpre.rowwise().sum();
    const Mat<S> dcols = w.w.transpose() * dpre;
    Mat<S> din = Mat<S>::Zero(cache.input.rows(), cache.input.cols());
    col2im_add(dcols, w.kernel, din);
    return din;
}

// ---------------------------------------------------------------------------
// Recurrent stage: gated memory cell with input/forget/output gates, run
// once per direction; the latent is the concatenation of both final
// hidden states. Gate rows are ordered [input, forget, cell, output].

template <typename S>
struct LstmCache {
    Mat<S> gi, gf, gg, go;  // H x T gate activations
    Mat<S> c, tanh_c, h;    // H x T states
};

template <typename S>
void lstm_forward(const LstmWeights<S>& w, const Mat<S>& x, const std::vector<int>& order,
                  LstmCache<S>& cache) {
    const int h_dim = static_cast<int>(w.wh.cols());
    const int t_len = static_cast<int>(x.cols());
    cache.gi.resize(h_dim, t_len);
    cache.gf.resize(h_dim, t_len);
    cache.gg.resize(h_dim, t_len);
    cache.go.resize(h_dim, t_len);
    cache.c.resize(h_dim, t_len);
    cache.tanh_c.resize(h_dim, t_len);
    cache.h.resize(h_dim, t_len);
    Vec<S> h_prev = Vec<S>::Zero(h_dim);
    Vec<S> c_prev = Vec<S>::Zero(h_dim);
    for (int idx : order) {
        const Vec<S> pre = w.wx * x.col(idx) + w.wh * h_prev + w.b;
        const Vec<S> gi = sigmoid_vec<S>(pre.head(h_dim));
        const Vec<S> gf = sigmoid_vec<S>(pre.segment(h_dim, h_dim));
        const Vec<S> gg = pre.segment(2 * h_dim, h_dim).array().tanh().matrix();
        const Vec<S> go = sigmoid_vec<S>(pre.tail(h_dim));
        const Vec<S> c = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
        const Vec<S> tc = c.array().tanh().matrix();
        cache.gi.col(idx) = gi;
        cache.gf.col(idx) = gf;
        cache.gg.col(idx) = gg;
        cache.go.col(idx) = go;
        cache.c.col(idx) = c;
        cache.tanh_c.col(idx) = tc;
        cache.h.col(idx) = go.cwiseProduct(tc);
        h_prev = cache.h.col(idx);
        c_prev = c;
    }
}

template <typename S>
void lstm_backward(const LstmWeights<S>& w, const Mat<S>& x, const std::vector<int>& order,
                   const LstmCache<S>& cache, const Vec<S>& dh_final, Mat<S>& dx, Mat<S>& dwx,
                   Mat<S>& dwh, Vec<S>& db) {
    const int h_dim = static_cast<int>(w.wh.cols());
    Vec<S> dh = dh_final;
    Vec<S> dc = Vec<S>::Zero(h_dim);
    Vec<S> dpre(4 * h_dim);
    for (std::size_t r = order.size(); r-- > 0;) {
        const int idx = order[r];
        const bool first = (r == 0);
        const auto gi = cache.gi.col(idx);
        const auto gf = cache.gf.col(idx);
        const auto gg = cache.gg.col(idx);
        const auto go = cache.go.col(idx);
        const auto tc = cache.tanh_c.col(idx);

        const Vec<S> do_ = dh.cwiseProduct(tc);
        dc += dh.cwiseProduct(go).cwiseProduct((S(1) - tc.array().square()).matrix());
        const Vec<S> di = dc.cwiseProduct(gg);
        const Vec<S> dg = dc.cwiseProduct(gi);
        Vec<S> df;
        if (first) {
            df = Vec<S>::Zero(h_dim);
        } else {
            df = dc.cwiseProduct(cache.c.col(order[r - 1]));
        }

        dpre.head(h_dim) = di.cwiseProduct(gi).cwiseProduct((S(1) - gi.array()).matrix());
        dpre.segment(h_dim, h_dim) = df.cwiseProduct(gf).cwiseProduct((S(1) - gf.array()).matrix());
        dpre.segment(2 * h_dim, h_dim) = dg.cwiseProduct((S(1) - gg.array().square()).matrix());
        dpre.tail(h_dim) = do_.cwiseProduct(go).cwiseProduct((S(1) - go.array()).matrix());

        dwx += dpre * x.col(idx).transpose();
        db += dpre;
        if (!first) dwh += dpre * cache.h.col(order[r - 1]).transpose();
        dx.col(idx) += w.wx.transpose() * dpre;
        dh = w.wh.transpose() * dpre;
        dc = dc.cwiseProduct(gf);
    }
}

// ---------------------------------------------------------------------------
// Heads

template <typename S>
struct HeadCache {
    Vec<S> in;
    Vec<S> hidden_pre;
    Vec<S> out_pre;
};

template <typename S>
Vec<S> head_forward(const HeadWeights<S>& w, const Vec<S>& z, HeadCache<S>& cache) {
    cache.in = z;
    cache.hidden_pre = w.w1 * z + w.b1;
    const Vec<S> hidden = cache.hidden_pre.cwiseMax(S(0));
    cache.out_pre = w.w2 * hidden + w.b2;
    return cache.out_pre;
}

template <typename S>
Vec<S> head_backward(const HeadWeights<S>& w, const HeadCache<S>& cache, const Vec<S>& dout, Mat<S>& dw1,
                     Vec<S>& db1, Mat<S>& dw2, Vec<S>& db2) {
    const Vec<S> hidden = cache.hidden_pre.cwiseMax(S(0));
    dw2 += dout * hidden.transpose();
    db2 += dout;
    Vec<S> dhidden = w.w2.transpose() * dout;
    for (Eigen::Index i = 0; i < dhidden.size(); ++i) {
        if (cache.hidden_pre(i) <= S(0)) dhidden(i) = S(0);
    }
    dw1 += dhidden * cache.in.transpose();
    db1 += dhidden;
    return w.w1.transpose() * dhidden;
}

// ---------------------------------------------------------------------------
// Extractor assembly

template <typename S>
struct ExtractCache {
    std::vector<ConvCache<S>> conv;
    Mat<S> conv_out;  // channels x steps entering the recurrent stage
    LstmCache<S> fw, bw;
    Vec<S> z;
};

std::vector<int> time_order(int steps, bool reversed) {
    std::vector<int> order(static_cast<std::size_t>(steps));
    std::iota(order.begin(), order.end(), 0);
    if (reversed) std::reverse(order.begin(), order.end());
    return order;
}

template <typename S>
void extract_forward(const NetworkConfig& cfg, const Weights<S>& w, const Mat<S>& x_cl,
                     ExtractCache<S>& cache) {
    Mat<S> cur = x_cl;
    cache.conv.resize(w.conv.size());
    for (std::size_t i = 0; i < w.conv.size(); ++i) {
        conv_block_forward<S>(w.conv[i], cur, cache.conv[i]);
        cur = cache.conv[i].pooled;
    }
    cache.conv_out = cur;
    const int steps = static_cast<int>(cur.cols());
    lstm_forward(w.fw, cache.conv_out, time_order(steps, false), cache.fw);
    lstm_forward(w.bw, cache.conv_out, time_order(steps, true), cache.bw);
    const int h = cfg.recurrent_hidden;
    cache.z.resize(2 * h);
    cache.z.head(h) = cache.fw.h.col(steps - 1);
    cache.z.tail(h) = cache.bw.h.col(0);
}

template <typename S>
void extract_backward(const NetworkConfig& cfg, const Weights<S>& w, const ExtractCache<S>& cache,
                      const Vec<S>& dz, GradBuffers<S>& g) {
    const int h = cfg.recurrent_hidden;
    const int steps = static_cast<int>(cache.conv_out.cols());
    Mat<S> dconv_out = Mat<S>::Zero(cache.conv_out.rows(), steps);
    const Vec<S> dz_fw = dz.head(h);
    const Vec<S> dz_bw = dz.tail(h);
    lstm_backward<S>(w.fw, cache.conv_out, time_order(steps, false), cache.fw, dz_fw, dconv_out,
                     g.fw_wx, g.fw_wh, g.fw_b);
    lstm_backward<S>(w.bw, cache.conv_out, time_order(steps, true), cache.bw, dz_bw, dconv_out,
                     g.bw_wx, g.bw_wh, g.bw_b);
    Mat<S> dcur = dconv_out;
    for (std::size_t i = w.conv.size(); i-- > 0;) {
        dcur = conv_block_backward<S>(w.conv[i], cache.conv[i], dcur, g.conv_w[i], g.conv_b[i]);
    }
}

constexpr double kLogClamp = 1e-12;

double clamped_log(double p, bool& clamped) {
    if (p < kLogClamp) {
        p = kLogClamp;
        clamped = true;
    }
    return std::log(p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Network

template <typename S>
Network<S>::Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
}

template <typename S>
ParameterStoreT<S> Network<S>::init_params(std::uint64_t seed) const {
    ParameterStoreT<S> store;
    Rng rng(derive_seed(seed, "init"));
    const int h = config_.recurrent_hidden;
    for (const auto& spec : param_specs(config_)) {
        NamedArray<S> a;
        a.name = spec.name;
        a.shape = spec.shape;
        a.data.assign(shape_size(spec.shape), S(0));
        switch (spec.rule) {
            case InitRule::FanInUniform: {
                const double scale = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
                for (auto& v : a.data) v = static_cast<S>(rng.uniform(-scale, scale));
                break;
            }
            case InitRule::Zero:
                break;
            case InitRule::LstmBias:
                // forget-gate block gets +1
                for (int i = h; i < 2 * h; ++i) a.data[static_cast<std::size_t>(i)] = S(1);
                break;
        }
        store.arrays.push_back(std::move(a));
    }
    return store;
}

template <typename S>
typename Network<S>::Vec Network<S>::extract(const ParameterStoreT<S>& params, const Mat& x) const {
    if (x.rows() != config_.input_length || x.cols() != config_.input_channels) {
        throw std::invalid_argument("extract input must be length x channels");
    }
    if (!x.allFinite()) throw std::invalid_argument("extract input must be finite");
    const auto w = unpack(config_, params);
    ExtractCache<S> cache;
    extract_forward<S>(config_, w, x.transpose(), cache);
    return cache.z;
}

template <typename S>
typename Network<S>::Vec Network<S>::predict(const ParameterStoreT<S>& params, const Vec& z) const {
    if (z.size() != config_.latent_dim()) throw std::invalid_argument("latent size mismatch");
    const auto w = unpack(config_, params);
    HeadCache<S> cache;
    return softmax_vec<S>(head_forward(w.classifier, z, cache));
}

template <typename S>
S Network<S>::discriminate(const ParameterStoreT<S>& params, int source_index, const Vec& z) const {
    if (z.size() != config_.latent_dim()) throw std::invalid_argument("latent size mismatch");
    if (source_index < 0 || source_index >= config_.n_sources) {
        throw std::invalid_argument("source index out of range");
    }
    const auto w = unpack(config_, params);
    HeadCache<S> cache;
    const S pre = head_forward(w.disc[static_cast<std::size_t>(source_index)], z, cache)(0);
    const S raw = stable_sigmoid(pre);
    // keep the score strictly inside (0, 1)
    const S lo = std::numeric_limits<S>::min();
    const S hi = std::nextafter(S(1), S(0));
    return std::clamp(raw, lo, hi);
}

template <typename S>
typename Network<S>::Mat Network<S>::posteriors(const ParameterStoreT<S>& params,
                                                const std::vector<Mat>& x_batch) const {
    const auto w = unpack(config_, params);
    Mat out(config_.n_classes, static_cast<Eigen::Index>(x_batch.size()));
    for (std::size_t b = 0; b < x_batch.size(); ++b) {
        const auto& x = x_batch[b];
        if (x.rows() != config_.input_channels || x.cols() != config_.input_length) {
            throw std::invalid_argument("posteriors input must be channels x length");
        }
        ExtractCache<S> cache;
        extract_forward<S>(config_, w, x, cache);
        HeadCache<S> head;
        out.col(static_cast<Eigen::Index>(b)) = softmax_vec<S>(head_forward(w.classifier, cache.z, head));
    }
    return out;
}

namespace {

// Shared forward/backward driver for loss_value and gradients.
template <typename S>
std::pair<ParameterStoreT<S>, LossBreakdown> run_network(
    const NetworkConfig& cfg, const ParameterStoreT<S>& params,
    const std::vector<BatchSample<S>>& batch, const LossSelector& selector, bool want_grads) {
    using MatS = Mat<S>;
    using VecS = Vec<S>;
    const int n_sources = cfg.n_sources;
    const bool need_cls = selector.kind != LossSelector::Kind::Domain;
    const bool need_domain = selector.kind != LossSelector::Kind::Classification;

    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (need_cls && static_cast<int>(selector.weights.size()) != n_sources) {
        throw std::invalid_argument("selector weights must have one entry per source");
    }
    if (selector.grl_lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (selector.kind == LossSelector::Kind::Domain &&
        (selector.domain_index < 0 || selector.domain_index >= n_sources)) {
        throw std::invalid_argument("domain index out of range");
    }

    for (const auto& s : batch) {
        if (s.x.rows() != cfg.input_channels || s.x.cols() != cfg.input_length) {
            throw std::invalid_argument("batch sample must be channels x length");
        }
        if (!s.x.allFinite()) throw std::invalid_argument("batch sample must be finite");
        if (s.source >= n_sources) throw std::invalid_argument("sample source index out of range");
    }

    const auto w = unpack(cfg, params);
    const std::size_t n_batch = batch.size();
    std::vector<ExtractCache<S>> caches(n_batch);
    for (std::size_t b = 0; b < n_batch; ++b) {
        extract_forward<S>(cfg, w, batch[b].x, caches[b]);
    }

    LossBreakdown breakdown;
    breakdown.domain.assign(static_cast<std::size_t>(n_sources), 0.0);

    auto grads = ParameterStoreT<S>{};
    GradBuffers<S> gbuf;
    std::vector<VecS> dz(n_batch);
    if (want_grads) {
        gbuf = GradBuffers<S>::zero(w);
        for (auto& v : dz) v = VecS::Zero(cfg.latent_dim());
    }

    // Classification path: weighted per-source mean cross-entropy.
    if (need_cls) {
        std::vector<std::vector<std::size_t>> by_source(static_cast<std::size_t>(n_sources));
        for (std::size_t b = 0; b < n_batch; ++b) {
            if (batch[b].source >= 0) {
                if (batch[b].label < 0 || batch[b].label >= cfg.n_classes) {
                    throw std::invalid_argument("source sample lacks a valid label");
                }
                by_source[static_cast<std::size_t>(batch[b].source)].push_back(b);
            }
        }
        if (selector.kind == LossSelector::Kind::Classification) {
            bool any = false;
            for (const auto& g : by_source) any = any || !g.empty();
            if (!any) throw std::invalid_argument("classification loss needs labeled source samples");
        }
        for (int i = 0; i < n_sources; ++i) {
            const auto& group = by_source[static_cast<std::size_t>(i)];
            if (group.empty()) continue;
            const double wi = selector.weights[static_cast<std::size_t>(i)];
            double mean_ce = 0.0;
            for (std::size_t b : group) {
                HeadCache<S> head;
                const VecS p = softmax_vec<S>(head_forward(w.classifier, caches[b].z, head));
                const auto y = batch[b].label;
                mean_ce -= clamped_log(static_cast<double>(p(y)), breakdown.clamped);
                if (want_grads && wi != 0.0) {
                    VecS dlogits = p;
                    dlogits(y) -= S(1);
                    dlogits *= static_cast<S>(wi / static_cast<double>(group.size()));
                    dz[b] += head_backward(w.classifier, head, dlogits, gbuf.cls_w1, gbuf.cls_b1,
                                           gbuf.cls_w2, gbuf.cls_b2);
                }
            }
            mean_ce /= static_cast<double>(group.size());
            breakdown.clv += wi * mean_ce;
        }
        if (!std::isfinite(breakdown.clv)) throw NumericError("classification loss is non-finite");
    }

    // Adversarial path: per-source binary cross-entropy against the target.
    if (need_domain) {
        std::vector<std::size_t> target_group;
        for (std::size_t b = 0; b < n_batch; ++b) {
            if (batch[b].source < 0) target_group.push_back(b);
        }
        for (int i = 0; i < n_sources; ++i) {
            const bool wanted = selector.kind == LossSelector::Kind::Total ||
                                selector.domain_index == i;
            if (!wanted) continue;
            const double wi =
                selector.kind == LossSelector::Kind::Total ? selector.weights[static_cast<std::size_t>(i)] : 1.0;
            std::vector<std::size_t> pos;
            for (std::size_t b = 0; b < n_batch; ++b) {
                if (batch[b].source == i) pos.push_back(b);
            }
            if (pos.empty() || target_group.empty()) {
                throw std::invalid_argument("domain loss " + std::to_string(i + 1) +
                                            " needs source and target samples in the batch");
            }
            // Everything that feeds the extractor is reversed and scaled;
            // the discriminator's own gradient is its plain descent
            // direction scaled by the source weight.
            const double disc_scale = wi;
            const double grl_scale = -selector.grl_lambda * wi;
            const bool touch_disc = want_grads && disc_scale != 0.0;
            const bool touch_extractor = want_grads && grl_scale != 0.0 && disc_scale != 0.0;
            const auto di = static_cast<std::size_t>(i);

            double loss_i = 0.0;
            auto accumulate = [&](std::size_t b, bool positive, std::size_t count) {
                HeadCache<S> head;
                const S pre = head_forward(w.disc[di], caches[b].z, head)(0);
                const double score = stable_sigmoid(static_cast<double>(pre));
                loss_i -= positive
                              ? clamped_log(score, breakdown.clamped) / static_cast<double>(count)
                              : clamped_log(1.0 - score, breakdown.clamped) / static_cast<double>(count);
                if (touch_disc) {
                    const double dpre_raw =
                        (positive ? score - 1.0 : score) / static_cast<double>(count);
                    VecS dout(1);
                    dout(0) = static_cast<S>(disc_scale * dpre_raw);
                    const VecS dz_disc =
                        head_backward(w.disc[di], head, dout, gbuf.disc_w1[di], gbuf.disc_b1[di],
                                      gbuf.disc_w2[di], gbuf.disc_b2[di]);
                    if (touch_extractor) {
                        dz[b] += static_cast<S>(grl_scale / disc_scale) * dz_disc;
                    }
                }
            };
            for (std::size_t b : pos) accumulate(b, true, pos.size());
            for (std::size_t b : target_group) accumulate(b, false, target_group.size());
            if (!std::isfinite(loss_i)) {
                throw NumericError("domain loss " + std::to_string(i + 1) + " is non-finite");
            }
            breakdown.domain[di] = loss_i;
            breakdown.adv += wi * loss_i;
        }
    }

    switch (selector.kind) {
        case LossSelector::Kind::Classification:
            breakdown.total = breakdown.clv;
            break;
        case LossSelector::Kind::Domain:
            breakdown.adv = breakdown.domain[static_cast<std::size_t>(selector.domain_index)];
            breakdown.total = breakdown.adv;
            break;
        case LossSelector::Kind::Total:
            breakdown.total = breakdown.clv + selector.grl_lambda * breakdown.adv;
            break;
    }
    if (!std::isfinite(breakdown.total)) throw NumericError("total loss is non-finite");

    if (want_grads) {
        for (std::size_t b = 0; b < n_batch; ++b) {
            if (dz[b].isZero(S(0))) continue;
            extract_backward<S>(cfg, w, caches[b], dz[b], gbuf);
        }
        // Flatten accumulators into a store congruent with the parameters.
        grads.arrays.reserve(params.arrays.size());
        for (const auto& a : params.arrays) {
            NamedArray<S> z;
            z.name = a.name;
            z.shape = a.shape;
            z.data.assign(a.data.size(), S(0));
            grads.arrays.push_back(std::move(z));
        }
        for (std::size_t i = 0; i < w.conv.size(); ++i) {
            const std::string base = "extractor.conv" + std::to_string(i + 1);
            store_matrix(grads, base + ".weight", gbuf.conv_w[i]);
            store_vector(grads, base + ".bias", gbuf.conv_b[i]);
        }
        store_matrix(grads, "extractor.lstm.fw.weight_x", gbuf.fw_wx);
        store_matrix(grads, "extractor.lstm.fw.weight_h", gbuf.fw_wh);
        store_vector(grads, "extractor.lstm.fw.bias", gbuf.fw_b);
        store_matrix(grads, "extractor.lstm.bw.weight_x", gbuf.bw_wx);
        store_matrix(grads, "extractor.lstm.bw.weight_h", gbuf.bw_wh);
        store_vector(grads, "extractor.lstm.bw.bias", gbuf.bw_b);
        store_matrix(grads, "classifier.hidden.weight", gbuf.cls_w1);
        store_vector(grads, "classifier.hidden.bias", gbuf.cls_b1);
        store_matrix(grads, "classifier.out.weight", gbuf.cls_w2);
        store_vector(grads, "classifier.out.bias", gbuf.cls_b2);
        for (int i = 0; i < n_sources; ++i) {
            const std::string base = "discriminator" + std::to_string(i + 1);
            const auto di = static_cast<std::size_t>(i);
            store_matrix(grads, base + ".hidden.weight", gbuf.disc_w1[di]);
            store_vector(grads, base + ".hidden.bias", gbuf.disc_b1[di]);
            store_matrix(grads, base + ".out.weight", gbuf.disc_w2[di]);
            store_vector(grads, base + ".out.bias", gbuf.disc_b2[di]);
        }
    }
    return {std::move(grads), std::move(breakdown)};
}

}  // namespace

template <typename S>
LossBreakdown Network<S>::loss_value(const ParameterStoreT<S>& params,
                                     const std::vector<BatchSample<S>>& batch,
                                     const LossSelector& selector) const {
    return run_network<S>(config_, params, batch, selector, false).second;
}

template <typename S>
std::pair<ParameterStoreT<S>, LossBreakdown> Network<S>::gradients(
    const ParameterStoreT<S>& params, const std::vector<BatchSample<S>>& batch,
    const LossSelector& selector) const {
    return run_network<S>(config_, params, batch, selector, true);
}

// ---------------------------------------------------------------------------
// Gradient reversal layer

template <typename S>
std::vector<S> grl_forward(const std::vector<S>& x) {
    return x;
}

template <typename S>
std::vector<S> grl_backward(const std::vector<S>& upstream, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    std::vector<S> out(upstream.size());
    const S neg_lambda = static_cast<S>(-lambda);
    for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = neg_lambda * upstream[i];
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json network_config_to_json(const NetworkConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.conv_blocks) {
        blocks.push_back({{"kernel", b.kernel}, {"channels", b.channels}, {"pool", b.pool}});
    }
    return json{{"input_length", c.input_length},
                {"input_channels", c.input_channels},
                {"conv_blocks", blocks},
                {"recurrent_hidden", c.recurrent_hidden},
                {"classifier_hidden", c.classifier_hidden},
                {"discriminator_hidden", c.discriminator_hidden},
                {"n_classes", c.n_classes},
                {"n_sources", c.n_sources}};
}

NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.input_length = j.at("input_length").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.conv_blocks.clear();
    for (const auto& b : j.at("conv_blocks")) {
        c.conv_blocks.push_back(
            {b.at("kernel").get<int>(), b.at("channels").get<int>(), b.at("pool").get<int>()});
    }
    c.recurrent_hidden = j.at("recurrent_hidden").get<int>();
    c.classifier_hidden = j.at("classifier_hidden").get<int>();
    c.discriminator_hidden = j.at("discriminator_hidden").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    c.n_sources = j.at("n_sources").get<int>();
    return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const CheckpointInfo& info,
                     const ParameterStore& params) {
    std::filesystem::create_directories(dir / "arrays");
    json arrays = json::array();
    for (const auto& a : params.arrays) {
        const std::string blob = "arrays/" + a.name + ".bin";
        write_f32_blob(dir / blob, a.data);
        arrays.push_back({{"name", a.name},
                          {"shape", a.shape},
                          {"blob", blob},
                          {"crc32", crc32_of(a.data.data(), a.data.size() * sizeof(float))}});
    }
    json manifest{{"format", "driftadapt-checkpoint"},
                  {"version", 1},
                  {"config", network_config_to_json(info.config)},
                  {"seed", info.seed},
                  {"step_count", info.step_count},
                  {"config_hash", info.config_hash},
                  {"arrays", arrays}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::pair<CheckpointInfo, ParameterStore> load_checkpoint(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw CorruptDataset("unparseable checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "driftadapt-checkpoint") {
        throw SchemaError("not a checkpoint directory: " + dir.string());
    }
    CheckpointInfo info;
    ParameterStore params;
    try {
        info.config = network_config_from_json(manifest.at("config"));
        info.seed = manifest.at("seed").get<std::uint64_t>();
        info.step_count = manifest.at("step_count").get<std::uint64_t>();
        info.config_hash = manifest.at("config_hash").get<std::string>();
        for (const auto& e : manifest.at("arrays")) {
            NamedArray<float> a;
            a.name = e.at("name").get<std::string>();
            a.shape = e.at("shape").get<std::vector<int>>();
            a.data = read_f32_blob(dir / e.at("blob").get<std::string>(), shape_size(a.shape));
            if (crc32_of(a.data.data(), a.data.size() * sizeof(float)) != e.at("crc32").get<std::uint32_t>()) {
                throw CorruptDataset("checkpoint blob checksum mismatch: " + a.name);
            }
            params.arrays.push_back(std::move(a));
        }
    } catch (const json::exception& e) {
        throw CorruptDataset("checkpoint manifest missing field: " + std::string(e.what()));
    }
    info.config.validate();
    return {info, params};
}

template struct ParameterStoreT<float>;
template struct ParameterStoreT<double>;
template class Network<float>;
template class Network<double>;
template std::vector<float> grl_forward(const std::vector<float>&);
template std::vector<double> grl_forward(const std::vector<double>&);
template std::vector<float> grl_backward(const std::vector<float>&, double);
template std::vector<double> grl_backward(const std::vector<double>&, double);

}  // namespace driftadapt
