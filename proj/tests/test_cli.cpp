#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/cli.hpp"
#include "driftadapt/config.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/pipeline.hpp"

using namespace driftadapt;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"drift-adapt"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "driftadapt_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Overrides shrinking the pipeline to seconds.
std::vector<std::string> tiny_overrides() {
    return {
        "--set", "simulation.campaign.n_motions=4",
        "--set", "simulation.campaign.target_pga=[2.0,5.0,9.0,14.0,18.0]",
        "--set", "simulation.motion.duration=10.24",
        "--set", "dataset.length=256",
        "--set", "network.conv_blocks=[{\"kernel\":5,\"channels\":8,\"pool\":4},"
                 "{\"kernel\":3,\"channels\":16,\"pool\":4}]",
        "--set", "network.recurrent_hidden=16",
        "--set", "network.classifier_hidden=16",
        "--set", "network.discriminator_hidden=16",
        "--set", "training.epochs=2",
        "--set", "training.batch_size=4",
    };
}

std::vector<std::string> with_out(std::vector<std::string> args, const fs::path& out) {
    args.push_back("--out");
    args.push_back(out.string());
    return args;
}

}  // namespace

TEST_CASE("config schema rejects unknown keys with the dot path") {
    const auto cfg_dir = fresh_dir("badcfg");
    write_text_file(cfg_dir / "bad.json", R"({"training": {"learning_rte": 0.001}})");
    const int rc = run_cli({"weights", "--config", (cfg_dir / "bad.json").string(), "--out",
                            (cfg_dir / "out").string()});
    CHECK(rc == 2);
}

TEST_CASE("config schema rejects type mismatches") {
    const auto cfg_dir = fresh_dir("badtype");
    write_text_file(cfg_dir / "bad.json", R"({"training": {"epochs": "ten"}})");
    CHECK(run_cli({"weights", "--config", (cfg_dir / "bad.json").string(), "--out",
                   (cfg_dir / "out").string()}) == 2);
}

TEST_CASE("overrides follow the same schema") {
    const auto out = fresh_dir("ovr");
    CHECK(run_cli({"weights", "--set", "weights.sigma=0.6", "--out", out.string()}) == 0);
    CHECK(run_cli({"weights", "--set", "weights.sig=0.6", "--out", out.string()}) == 2);
    CHECK(run_cli({"weights", "--set", "nonsense", "--out", out.string()}) == 2);
}

TEST_CASE("validate_against_schema pinpoints nested fields") {
    const auto schema = PipelineConfig::defaults().raw();
    nlohmann::json bad = {{"simulation", {{"motion", {{"dtt", 0.01}}}}}};
    try {
        validate_against_schema(schema, bad, "");
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("simulation.motion.dtt") != std::string::npos);
    }
}

TEST_CASE("run directories are keyed by config hash and seed") {
    const auto a = PipelineConfig::load(std::nullopt, {}, 7);
    const auto b = PipelineConfig::load(std::nullopt, {"training.epochs=9"}, 7);
    CHECK(a.hash() != b.hash());
    const auto pa = make_run_paths(a, "/tmp/x");
    CHECK(pa.root.string().find(a.hash()) != std::string::npos);
    CHECK(pa.root.string().find("seed7") != std::string::npos);
}

TEST_CASE("weights subcommand writes the weight set") {
    const auto out = fresh_dir("wout");
    REQUIRE(run_cli({"weights", "--out", out.string()}) == 0);
    const auto cfg = PipelineConfig::load(std::nullopt, {}, std::nullopt);
    const auto paths = make_run_paths(cfg, out);
    const auto j = nlohmann::json::parse(read_text_file(paths.weights_json()));
    CHECK(j.at("weights").size() == 3);
    const double sum = j.at("weights")[0].get<double>() + j.at("weights")[1].get<double>() +
                       j.at("weights")[2].get<double>();
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("stage ordering is enforced with exit code 2 and the missing path") {
    const auto out = fresh_dir("order");
    auto args = with_out(tiny_overrides(), out);
    args.insert(args.begin(), "train");
    CHECK(run_cli(args) == 2);
}

TEST_CASE("mismatched config hash on resume is refused") {
    const auto out = fresh_dir("mismatch");
    auto sim = with_out(tiny_overrides(), out);
    sim.insert(sim.begin(), "simulate");
    REQUIRE(run_cli(sim) == 0);

    // tamper with the recorded hash; the next stage must refuse the input
    fs::path run;
    for (const auto& e : fs::directory_iterator(out)) run = e.path();
    for (const char* rel : {"sim/source_building/manifest.json", "sim/target_building/manifest.json"}) {
        auto manifest = nlohmann::json::parse(read_text_file(run / rel));
        manifest["config_hash"] = "deadbeef";
        write_text_file(run / rel, manifest.dump(2) + "\n");
    }
    auto build = with_out(tiny_overrides(), out);
    build.insert(build.begin(), "build-dataset");
    CHECK(run_cli(build) == 2);
}

TEST_CASE("tiny pipeline runs end to end and is byte-identical across runs") {
    const auto out1 = fresh_dir("det1");
    const auto out2 = fresh_dir("det2");
    auto args1 = with_out(tiny_overrides(), out1);
    args1.insert(args1.begin(), "pipeline");
    auto args2 = with_out(tiny_overrides(), out2);
    args2.insert(args2.begin(), "pipeline");
    REQUIRE(run_cli(args1) == 0);
    REQUIRE(run_cli(args2) == 0);

    fs::path run1, run2;
    for (const auto& e : fs::directory_iterator(out1)) run1 = e.path();
    for (const auto& e : fs::directory_iterator(out2)) run2 = e.path();

    for (const char* rel : {"eval/report.json", "eval/comparison.json", "weights.json",
                            "train/adapted/manifest.json", "train/baseline/manifest.json"}) {
        CHECK(read_text_file(run1 / rel) == read_text_file(run2 / rel));
    }
    // checkpoint payloads byte for byte
    for (const auto& e : fs::recursive_directory_iterator(run1 / "train")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), run1);
        CHECK(read_text_file(e.path()) == read_text_file(run2 / rel));
    }
}
