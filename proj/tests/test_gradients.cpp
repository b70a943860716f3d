#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "driftadapt/network.hpp"
#include "driftadapt/rng.hpp"

using namespace driftadapt;

namespace {

NetworkConfig reduced_config() {
    NetworkConfig c;
    c.input_length = 64;
    c.input_channels = 4;
    c.conv_blocks = {{7, 4, 4}, {5, 8, 4}};
    c.recurrent_hidden = 8;
    c.classifier_hidden = 8;
    c.discriminator_hidden = 8;
    return c;
}

std::vector<BatchSample<double>> make_batch(const NetworkConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<BatchSample<double>> batch;
    for (int src = 0; src < cfg.n_sources; ++src) {
        for (int k = 0; k < 3; ++k) {
            BatchSample<double> b;
            b.x.resize(cfg.input_channels, cfg.input_length);
            for (int i = 0; i < b.x.rows(); ++i) {
                for (int j = 0; j < b.x.cols(); ++j) b.x(i, j) = rng.normal();
            }
            b.source = src;
            b.label = static_cast<int>(rng.below(3));
            batch.push_back(std::move(b));
        }
    }
    for (int k = 0; k < 3; ++k) {
        BatchSample<double> b;
        b.x.resize(cfg.input_channels, cfg.input_length);
        for (int i = 0; i < b.x.rows(); ++i) {
            for (int j = 0; j < b.x.cols(); ++j) b.x(i, j) = rng.normal();
        }
        b.source = -1;
        batch.push_back(std::move(b));
    }
    return batch;
}

// Central finite differences of the selected loss, step 1e-5, array by
// array. The oracle goes through loss_value only and never touches the
// reverse-mode path it checks.
ParameterStoreT<double> finite_difference(const Network<double>& net, ParameterStoreT<double> params,
                                          const std::vector<BatchSample<double>>& batch,
                                          const LossSelector& selector) {
    constexpr double h = 1e-5;
    ParameterStoreT<double> fd;
    for (const auto& a : params.arrays) {
        NamedArray<double> g;
        g.name = a.name;
        g.shape = a.shape;
        g.data.assign(a.data.size(), 0.0);
        fd.arrays.push_back(std::move(g));
    }
    for (std::size_t ai = 0; ai < params.arrays.size(); ++ai) {
        auto& data = params.arrays[ai].data;
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double saved = data[k];
            data[k] = saved + h;
            const double up = net.loss_value(params, batch, selector).total;
            data[k] = saved - h;
            const double down = net.loss_value(params, batch, selector).total;
            data[k] = saved;
            fd.arrays[ai].data[k] = (up - down) / (2.0 * h);
        }
    }
    return fd;
}

double max_rel_error(const NamedArray<double>& a, const NamedArray<double>& b, double sign = 1.0) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        const double x = a.data[k];
        const double y = sign * b.data[k];
        const double denom = std::max({std::abs(x), std::abs(y), 1e-6});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.rfind(prefix, 0) == 0;
}

}  // namespace

TEST_CASE("gradient store is shape-congruent with the parameters") {
    const auto cfg = reduced_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(1);
    const auto batch = make_batch(cfg, 2);
    LossSelector sel;
    sel.kind = LossSelector::Kind::Total;
    sel.weights = {0.5, 0.3, 0.2};
    sel.grl_lambda = 0.7;
    const auto [grads, breakdown] = net.gradients(params, batch, sel);
    REQUIRE(grads.arrays.size() == params.arrays.size());
    for (std::size_t i = 0; i < grads.arrays.size(); ++i) {
        CHECK(grads.arrays[i].name == params.arrays[i].name);
        CHECK(grads.arrays[i].shape == params.arrays[i].shape);
        CHECK(grads.arrays[i].data.size() == params.arrays[i].data.size());
    }
    CHECK(std::isfinite(breakdown.total));
}

TEST_CASE("classification gradients match central finite differences") {
    const auto cfg = reduced_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(11);
    const auto batch = make_batch(cfg, 12);
    LossSelector sel;
    sel.kind = LossSelector::Kind::Classification;
    sel.weights = {0.4879, 0.3466, 0.1655};

    const auto [grads, breakdown] = net.gradients(params, batch, sel);
    CHECK(breakdown.clv > 0.0);
    const auto fd = finite_difference(net, params, batch, sel);
    for (std::size_t i = 0; i < grads.arrays.size(); ++i) {
        const auto& name = grads.arrays[i].name;
        if (starts_with(name, "discriminator")) {
            for (double v : grads.arrays[i].data) CHECK(v == 0.0);
        } else {
            INFO("parameter block ", name);
            CHECK(max_rel_error(grads.arrays[i], fd.arrays[i]) < 1e-4);
        }
    }
}

TEST_CASE("each domain loss matches finite differences through the reversal") {
    const auto cfg = reduced_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(21);
    const auto batch = make_batch(cfg, 22);
    for (int domain = 0; domain < 3; ++domain) {
        LossSelector sel;
        sel.kind = LossSelector::Kind::Domain;
        sel.domain_index = domain;
        sel.grl_lambda = 1.0;
        const auto [grads, breakdown] = net.gradients(params, batch, sel);
        CHECK(breakdown.domain[static_cast<std::size_t>(domain)] > 0.0);
        const auto fd = finite_difference(net, params, batch, sel);
        const std::string own = "discriminator" + std::to_string(domain + 1);
        for (std::size_t i = 0; i < grads.arrays.size(); ++i) {
            const auto& name = grads.arrays[i].name;
            INFO("domain ", domain + 1, " parameter block ", name);
            if (starts_with(name, own)) {
                // the discriminator's own descent direction
                CHECK(max_rel_error(grads.arrays[i], fd.arrays[i]) < 1e-4);
            } else if (starts_with(name, "discriminator") || starts_with(name, "classifier")) {
                for (double v : grads.arrays[i].data) CHECK(v == 0.0);
            } else {
                // extractor path carries the reversal: -lambda times the
                // true derivative, here with lambda = 1
                CHECK(max_rel_error(grads.arrays[i], fd.arrays[i], -1.0) < 1e-4);
            }
        }
    }
}

TEST_CASE("a zero source weight silences that discriminator exactly") {
    const auto cfg = reduced_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(31);
    const auto batch = make_batch(cfg, 32);
    LossSelector sel;
    sel.kind = LossSelector::Kind::Total;
    sel.weights = {0.6, 0.0, 0.4};
    sel.grl_lambda = 0.5;
    const auto [grads, breakdown] = net.gradients(params, batch, sel);
    for (const auto& a : grads.arrays) {
        if (starts_with(a.name, "discriminator2")) {
            for (double v : a.data) CHECK(v == 0.0);
        }
    }
    CHECK(breakdown.domain[1] > 0.0);  // the loss is still reported
}

TEST_CASE("lambda zero annihilates the domain path into the extractor") {
    const auto cfg = reduced_config();
    const Network<double> net(cfg);
    const auto params = net.init_params(41);
    const auto batch = make_batch(cfg, 42);

    LossSelector domain_sel;
    domain_sel.kind = LossSelector::Kind::Domain;
    domain_sel.domain_index = 1;
    domain_sel.grl_lambda = 0.0;
    const auto [dgrads, dbreak] = net.gradients(params, batch, domain_sel);
    for (const auto& a : dgrads.arrays) {
        if (starts_with(a.name, "extractor")) {
            for (double v : a.data) CHECK(v == 0.0);
        }
    }

    // At lambda = 0 the total-loss extractor/classifier gradients equal
    // the pure classification gradients bit for bit.
    LossSelector total_sel;
    total_sel.kind = LossSelector::Kind::Total;
    total_sel.weights = {0.5, 0.25, 0.25};
    total_sel.grl_lambda = 0.0;
    LossSelector cls_sel;
    cls_sel.kind = LossSelector::Kind::Classification;
    cls_sel.weights = total_sel.weights;
    const auto [tg, tb] = net.gradients(params, batch, total_sel);
    const auto [cg, cb] = net.gradients(params, batch, cls_sel);
    for (std::size_t i = 0; i < tg.arrays.size(); ++i) {
        if (starts_with(tg.arrays[i].name, "discriminator")) continue;
        CHECK(tg.arrays[i].data == cg.arrays[i].data);
    }
    CHECK(tb.clv == cb.clv);
}
