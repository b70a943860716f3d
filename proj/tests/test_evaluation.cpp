#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <regex>
#include <sstream>

#include "driftadapt/binio.hpp"
#include "driftadapt/evaluation.hpp"
#include "driftadapt/rng.hpp"

using namespace driftadapt;
namespace fs = std::filesystem;

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

// Forces the classifier output to a constant logit vector regardless of z.
ParameterStore constant_predictor(const Network<float>& net, std::uint64_t seed,
                                  std::array<float, 3> logits) {
    auto params = net.init_params(seed);
    auto& w2 = params.at("classifier.out.weight").data;
    std::fill(w2.begin(), w2.end(), 0.0f);
    params.at("classifier.out.bias").data.assign(logits.begin(), logits.end());
    return params;
}

std::vector<EvalSample> random_samples(const NetworkConfig& cfg, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EvalSample> out(n);
    for (auto& s : out) {
        s.x.resize(4, cfg.input_length);
        for (int i = 0; i < s.x.rows(); ++i) {
            for (int j = 0; j < s.x.cols(); ++j) s.x(i, j) = static_cast<float>(rng.normal());
        }
        s.label = static_cast<int>(rng.below(3)) + 1;
    }
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "driftadapt_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("an always-right predictor scores a diagonal confusion") {
    const Network<float> net(tiny_config());
    const auto params = constant_predictor(net, 1, {5.0f, 0.0f, 0.0f});
    auto samples = random_samples(tiny_config(), 20, 2);
    for (auto& s : samples) s.label = 1;  // predictor always says class 1
    const auto r = evaluate(net, params, "d", samples);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 < 1.0);  // other classes never occur
    CHECK(r.confusion[0][0] == 20);
    CHECK(r.n_samples == 20);
}

TEST_CASE("an always-wrong predictor scores a single off-diagonal cell") {
    const Network<float> net(tiny_config());
    const auto params = constant_predictor(net, 1, {0.0f, 5.0f, 0.0f});
    auto samples = random_samples(tiny_config(), 15, 3);
    for (auto& s : samples) s.label = 1;
    const auto r = evaluate(net, params, "d", samples);
    CHECK(r.accuracy == 0.0);
    CHECK(r.confusion[0][1] == 15);
    std::size_t total = 0;
    for (const auto& row : r.confusion) {
        for (auto c : row) total += c;
    }
    CHECK(total == 15);
}

TEST_CASE("accuracy equals an independent recount of argmax predictions") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(7);
    const auto samples = random_samples(cfg, 60, 8);
    const auto r = evaluate(net, params, "d", samples);

    std::size_t correct = 0;
    std::array<std::array<std::size_t, 3>, 3> confusion{};
    for (const auto& s : samples) {
        const auto p = net.posteriors(params, {s.x});
        int pred = 0;
        for (int k = 1; k < 3; ++k) {
            if (p(k, 0) > p(pred, 0)) pred = k;
        }
        confusion[static_cast<std::size_t>(s.label - 1)][static_cast<std::size_t>(pred)]++;
        if (pred + 1 == s.label) ++correct;
    }
    CHECK(r.accuracy == static_cast<double>(correct) / 60.0);
    CHECK(r.confusion == confusion);
}

TEST_CASE("a uniformly random predictor stays near one third on balanced labels") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    // random network + standardized random inputs behaves like a random guesser
    const auto params = net.init_params(99);
    auto samples = random_samples(cfg, 300, 11);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = static_cast<int>(i % 3) + 1;
    const auto r = evaluate(net, params, "d", samples);
    const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 300.0);
    CHECK(r.accuracy >= 1.0 / 3.0 - 3.0 * sigma - 1e-12);
    CHECK(r.accuracy <= 1.0 / 3.0 + 3.0 * sigma + 1e-12);
}

TEST_CASE("evaluation rejects unlabeled samples") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(1);
    auto samples = random_samples(cfg, 5, 4);
    samples[2].label = 0;
    CHECK_THROWS_AS(evaluate(net, params, "d", samples), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(net, params, "d", {}), std::invalid_argument);
}

TEST_CASE("reports round-trip through emit and parse") {
    std::array<std::array<std::size_t, 3>, 3> confusion{{{40, 3, 1}, {5, 30, 6}, {0, 4, 25}}};
    const auto report = EvalReport::from_confusion("source_pooled_test", confusion);
    const auto dir = fresh_dir("reports");
    emit_report({report}, dir);

    const auto parsed = parse_report(dir / "report.json");
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].domain_id == report.domain_id);
    CHECK(parsed[0].confusion == report.confusion);
    CHECK(parsed[0].accuracy == report.accuracy);  // recomputed exactly from counts
    CHECK(parsed[0].macro_f1 == report.macro_f1);
    CHECK(parsed[0].n_samples == report.n_samples);
}

TEST_CASE("confusion CSV holds exactly three data rows of three columns") {
    std::array<std::array<std::size_t, 3>, 3> confusion{{{7, 0, 0}, {0, 8, 0}, {1, 0, 9}}};
    const auto dir = fresh_dir("csv");
    emit_report({EvalReport::from_confusion("target_story1", confusion)}, dir);
    const auto text = read_text_file(dir / "confusion_target_story1.csv");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "predicted_1,predicted_2,predicted_3");
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CHECK(std::count(line.begin(), line.end(), ',') == 2);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("accuracies print with four decimal places") {
    std::array<std::array<std::size_t, 3>, 3> confusion{{{2, 1, 0}, {0, 3, 0}, {0, 0, 2}}};
    const auto dir = fresh_dir("fourdp");
    emit_report({EvalReport::from_confusion("d", confusion)}, dir);
    const auto text = read_text_file(dir / "report.json");
    const std::regex re("\"accuracy\": \"\\d\\.\\d{4}\"");
    CHECK(std::regex_search(text, re));
    CHECK(text.find("\"accuracy\": \"0.8750\"") != std::string::npos);  // 7/8
}

TEST_CASE("identical models compare with zero delta") {
    const auto cfg = tiny_config();
    const Network<float> net(cfg);
    const auto params = net.init_params(31);

    DatasetBundle bundle;
    for (int src = 0; src < 3; ++src) {
        DomainDataset d;
        d.domain_id = "source_story" + std::to_string(src + 1);
        d.is_source = true;
        d.length = 64;
        d.physics = (src + 1) / 3.0;
        Rng rng(static_cast<std::uint64_t>(src) + 50);
        for (int i = 0; i < 12; ++i) {
            FeatureSample s;
            s.x.resize(64 * 4);
            for (auto& v : s.x) v = static_cast<float>(rng.normal());
            s.label = i % 3 + 1;
            s.split = i < 8 ? Split::Train : (i < 10 ? Split::Val : Split::Test);
            d.samples.push_back(std::move(s));
        }
        bundle.sources.push_back(std::move(d));
    }
    bundle.target.domain_id = "target_story1";
    bundle.target.length = 64;
    bundle.target.physics = 0.2;
    Rng rng(99);
    std::vector<std::uint8_t> eval_labels;
    for (int i = 0; i < 9; ++i) {
        FeatureSample s;
        s.x.resize(64 * 4);
        for (auto& v : s.x) v = static_cast<float>(rng.normal());
        bundle.target.samples.push_back(std::move(s));
        eval_labels.push_back(static_cast<std::uint8_t>(i % 3 + 1));
    }

    const auto cmp = compare_models(net, params, params, bundle, eval_labels);
    CHECK(cmp.target_accuracy_delta == 0.0);
    CHECK(cmp.baseline_target.accuracy == cmp.adapted_target.accuracy);
    CHECK(cmp.baseline_source.confusion == cmp.adapted_source.confusion);

    const auto dir = fresh_dir("cmp");
    emit_comparison(cmp, dir / "comparison.json");
    const auto parsed = parse_comparison(dir / "comparison.json");
    CHECK(parsed.target_accuracy_delta == 0.0);
    CHECK(parsed.baseline_source.confusion == cmp.baseline_source.confusion);
}
