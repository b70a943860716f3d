#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "driftadapt/errors.hpp"
#include "driftadapt/network.hpp"
#include "driftadapt/rng.hpp"

using namespace driftadapt;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig c;
    c.input_length = 64;
    c.input_channels = 4;
    c.conv_blocks = {{7, 4, 4}, {5, 8, 4}};
    c.recurrent_hidden = 8;
    c.classifier_hidden = 8;
    c.discriminator_hidden = 8;
    return c;
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> random_input(Rng& rng, int rows, int cols) {
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> x(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) x(i, j) = static_cast<S>(rng.normal());
    }
    return x;
}

}  // namespace

TEST_CASE("config geometry is validated") {
    auto c = tiny_config();
    CHECK(c.recurrent_steps() == 4);
    CHECK(c.latent_dim() == 16);
    c.validate();

    c.conv_blocks.push_back({3, 8, 4});  // 64 / 64 = 1 step
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config();
    c.conv_blocks[0].kernel = 4;  // even kernel
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("initialization is deterministic in the seed") {
    const Network<float> net(tiny_config());
    const auto a = net.init_params(11);
    const auto b = net.init_params(11);
    const auto c = net.init_params(12);
    REQUIRE(a.arrays.size() == b.arrays.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.arrays.size(); ++i) {
        CHECK(a.arrays[i].name == b.arrays[i].name);
        CHECK(a.arrays[i].data == b.arrays[i].data);
        if (a.arrays[i].data != c.arrays[i].data) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("biases start at zero except the recurrent forget gate") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(5);
    const int h = cfg.recurrent_hidden;
    for (const auto& a : params.arrays) {
        if (a.name.find(".bias") == std::string::npos) continue;
        if (a.name.find("lstm") != std::string::npos) {
            for (int i = 0; i < 4 * h; ++i) {
                CHECK(a.data[static_cast<std::size_t>(i)] == ((i >= h && i < 2 * h) ? 1.0f : 0.0f));
            }
        } else {
            for (float v : a.data) CHECK(v == 0.0f);
        }
    }
}

TEST_CASE("extract returns a deterministic latent of dimension d") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(3);
    Rng rng(17);
    const auto x = random_input<double>(rng, cfg.input_length, 4);
    const auto z1 = net.extract(params, x);
    const auto z2 = net.extract(params, x);
    CHECK(z1.size() == cfg.latent_dim());
    CHECK(z1 == z2);
    CHECK(z1.allFinite());
}

TEST_CASE("extract validates shape and finiteness") {
    const Network<double> net(tiny_config());
    const auto params = net.init_params(3);
    Eigen::MatrixXd wrong(4, 64);  // transposed orientation
    wrong.setZero();
    CHECK_THROWS_AS(net.extract(params, wrong), std::invalid_argument);
    Eigen::MatrixXd bad(64, 4);
    bad.setZero();
    bad(5, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(net.extract(params, bad), std::invalid_argument);
}

TEST_CASE("batched evaluation equals per-sample evaluation") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(3);
    Rng rng(8);
    std::vector<Eigen::MatrixXf> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(random_input<float>(rng, 4, cfg.input_length));
    const auto batch = net.posteriors(params, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto single = net.posteriors(params, {xs[i]});
        for (int k = 0; k < 3; ++k) {
            CHECK(batch(k, static_cast<Eigen::Index>(i)) == single(k, 0));  // no cross-sample coupling
        }
    }
}

TEST_CASE("zeroed output head gives the uniform posterior") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(3);
    std::fill(params.at("classifier.out.weight").data.begin(),
              params.at("classifier.out.weight").data.end(), 0.0);
    Rng rng(4);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(cfg.latent_dim());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const auto p = net.predict(params, z);
    for (int k = 0; k < 3; ++k) CHECK(p(k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("posterior is invariant to a constant logit shift") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(3);
    Rng rng(4);
    Eigen::VectorXd z(cfg.latent_dim());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const auto p1 = net.predict(params, z);
    for (auto& v : params.at("classifier.out.bias").data) v += 7.5;
    const auto p2 = net.predict(params, z);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(p1(k) - p2(k)) < 1e-12);
}

TEST_CASE("logits (10, 0, 0) give the known posterior") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(3);
    std::fill(params.at("classifier.out.weight").data.begin(),
              params.at("classifier.out.weight").data.end(), 0.0);
    params.at("classifier.out.bias").data = {10.0, 0.0, 0.0};
    const auto p = net.predict(params, Eigen::VectorXd::Zero(cfg.latent_dim()));
    CHECK(p(0) == doctest::Approx(0.9999092083843409).epsilon(1e-12));
    CHECK(p(0) == doctest::Approx(0.99991).epsilon(1e-4));
}

TEST_CASE("posterior sums to one on random inputs") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(21);
    Rng rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        Eigen::VectorXd z(cfg.latent_dim());
        for (int i = 0; i < z.size(); ++i) z(i) = rng.uniform(-30.0, 30.0);
        const auto p = net.predict(params, z);
        CHECK(std::abs(p.sum() - 1.0) < 1e-9);
        for (int k = 0; k < 3; ++k) {
            CHECK(p(k) >= 0.0);
            CHECK(p(k) <= 1.0);
        }
    }
}

TEST_CASE("zero discriminator head scores one half") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(3);
    std::fill(params.at("discriminator2.out.weight").data.begin(),
              params.at("discriminator2.out.weight").data.end(), 0.0);
    const double d = net.discriminate(params, 1, Eigen::VectorXd::Ones(cfg.latent_dim()));
    CHECK(d == 0.5);
}

TEST_CASE("engineered pre-activation of five gives the known score") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(3);
    std::fill(params.at("discriminator1.out.weight").data.begin(),
              params.at("discriminator1.out.weight").data.end(), 0.0);
    params.at("discriminator1.out.bias").data = {5.0};
    const double d = net.discriminate(params, 0, Eigen::VectorXd::Zero(cfg.latent_dim()));
    CHECK(d == doctest::Approx(0.9933071490757153).epsilon(1e-12));
}

TEST_CASE("discriminator scores stay strictly inside (0, 1)") {
    const auto cfg = tiny_config();
    const Network<double> net(cfg);
    auto params = net.init_params(9);
    Rng rng(6);
    for (int trial = 0; trial < 10000; ++trial) {
        Eigen::VectorXd z(cfg.latent_dim());
        for (int i = 0; i < z.size(); ++i) z(i) = rng.uniform(-50.0, 50.0);
        const double d = net.discriminate(params, static_cast<int>(rng.below(3)), z);
        CHECK(d > 0.0);
        CHECK(d < 1.0);
    }
    // saturate the head outright; the clamp must keep the range open
    params.at("discriminator1.out.bias").data = {1e4};
    std::fill(params.at("discriminator1.out.weight").data.begin(),
              params.at("discriminator1.out.weight").data.end(), 0.0);
    CHECK(net.discriminate(params, 0, Eigen::VectorXd::Zero(cfg.latent_dim())) < 1.0);
    params.at("discriminator1.out.bias").data = {-1e4};
    CHECK(net.discriminate(params, 0, Eigen::VectorXd::Zero(cfg.latent_dim())) > 0.0);
}

TEST_CASE("gradient reversal: identity forward, exact minus-lambda backward") {
    Rng rng(2);
    std::vector<float> x(257);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    const auto fwd = grl_forward(x);
    CHECK(std::memcmp(fwd.data(), x.data(), x.size() * sizeof(float)) == 0);

    for (double lambda : {0.0, 0.3, 1.0}) {
        const auto back = grl_backward(x, lambda);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const float expected = static_cast<float>(-lambda) * x[i];
            CHECK(std::memcmp(&back[i], &expected, sizeof(float)) == 0);  // bit-for-bit
        }
    }
    CHECK_THROWS_AS(grl_backward(x, -0.1), std::invalid_argument);

    // spot value from the definition: upstream 2.0 at lambda 0.3
    const auto one = grl_backward(std::vector<double>{2.0}, 0.3);
    CHECK(one[0] == doctest::Approx(-0.6).epsilon(1e-15));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(77);
    const auto dir = std::filesystem::temp_directory_path() / "driftadapt_test" / "ckpt";
    std::filesystem::remove_all(dir);
    CheckpointInfo info;
    info.config = cfg;
    info.seed = 77;
    info.step_count = 123;
    info.config_hash = "cafebabe";
    save_checkpoint(dir, info, params);
    const auto [loaded_info, loaded] = load_checkpoint(dir);
    CHECK(loaded_info.seed == 77);
    CHECK(loaded_info.step_count == 123);
    CHECK(loaded_info.config_hash == "cafebabe");
    CHECK(loaded_info.config.recurrent_hidden == cfg.recurrent_hidden);
    REQUIRE(loaded.arrays.size() == params.arrays.size());
    for (std::size_t i = 0; i < params.arrays.size(); ++i) {
        CHECK(loaded.arrays[i].name == params.arrays[i].name);
        CHECK(loaded.arrays[i].shape == params.arrays[i].shape);
        CHECK(loaded.arrays[i].data == params.arrays[i].data);
    }

    // corrupt one payload byte: load must refuse
    std::fstream f(dir / "arrays" / "classifier.hidden.weight.bin",
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put('\x55');
    f.close();
    CHECK_THROWS_AS(load_checkpoint(dir), CorruptDataset);
}

TEST_CASE("parameter groups separate the discriminators") {
    CHECK(param_group_of("extractor.conv1.weight") == 0);
    CHECK(param_group_of("extractor.lstm.fw.bias") == 0);
    CHECK(param_group_of("classifier.out.weight") == 0);
    CHECK(param_group_of("discriminator1.hidden.weight") == 1);
    CHECK(param_group_of("discriminator3.out.bias") == 3);
}
