#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driftadapt/labels.hpp"
#include "driftadapt/rng.hpp"

using namespace driftadapt;

namespace {

ResponseRecord record_with_drifts(std::size_t n_stories, std::size_t n_steps) {
    ResponseRecord r;
    r.dt = 0.01;
    r.n_steps = n_steps;
    r.n_stories = n_stories;
    for (int ax = 0; ax < 2; ++ax) {
        r.abs_accel[ax].assign(n_stories + 1, std::vector<double>(n_steps, 0.0));
        r.drift[ax].assign(n_stories, std::vector<double>(n_steps, 0.0));
    }
    return r;
}

}  // namespace

TEST_CASE("zero drift gives zero ratio") {
    const auto rec = record_with_drifts(2, 50);
    const auto s = peak_drift_ratio(rec, 1, 4.2672);
    CHECK(s.delta_max == 0.0);
    CHECK(s.drift_ratio == 0.0);
    CHECK(s.story_height == 4.2672);
}

TEST_CASE("peak scans magnitudes over time") {
    auto rec = record_with_drifts(1, 3);
    rec.drift[0][0] = {0.01, -0.03, 0.02};
    const auto s = peak_drift_ratio(rec, 1, 4.2672);
    CHECK(s.delta_max == 0.03);
    CHECK(s.drift_ratio == doctest::Approx(0.03 / 4.2672).epsilon(1e-12));
    CHECK(s.drift_ratio == doctest::Approx(0.00703).epsilon(1e-3));
}

TEST_CASE("peak covers both axes") {
    auto rec = record_with_drifts(1, 4);
    rec.drift[0][0] = {0.01, 0.0, 0.0, 0.0};
    rec.drift[1][0] = {0.0, 0.0, -0.05, 0.0};
    CHECK(peak_drift_ratio(rec, 1, 1.0).delta_max == 0.05);
}

TEST_CASE("peak equals a brute-force scan on random records") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t stories = 1 + rng.below(4);
        const std::size_t steps = 2 + rng.below(200);
        auto rec = record_with_drifts(stories, steps);
        for (int ax = 0; ax < 2; ++ax) {
            for (std::size_t s = 0; s < stories; ++s) {
                for (std::size_t t = 0; t < steps; ++t) {
                    rec.drift[ax][s][t] = rng.uniform(-0.08, 0.08);
                }
            }
        }
        const std::size_t story = 1 + rng.below(stories);
        // independent exhaustive scan
        double brute = 0.0;
        for (int ax = 0; ax < 2; ++ax) {
            for (std::size_t t = 0; t < steps; ++t) {
                brute = std::max(brute, std::abs(rec.drift[ax][story - 1][t]));
            }
        }
        const auto s = peak_drift_ratio(rec, story, 4.2672);
        CHECK(s.delta_max == brute);               // bit-exact
        CHECK(s.drift_ratio == brute / 4.2672);    // exact division per definition
    }
}

TEST_CASE("story and height arguments are validated") {
    const auto rec = record_with_drifts(2, 10);
    CHECK_THROWS_AS(peak_drift_ratio(rec, 0, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(peak_drift_ratio(rec, 3, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(peak_drift_ratio(rec, 1, 0.0), std::invalid_argument);
}

TEST_CASE("damage bins are half-open on the left") {
    CHECK(classify_drift(0.005) == 1);
    CHECK(classify_drift(0.015) == 2);
    CHECK(classify_drift(0.025) == 3);
    CHECK(classify_drift(0.01) == 2);
    CHECK(classify_drift(0.02) == 3);
    CHECK(classify_drift(0.0) == 1);
    CHECK(classify_drift(1.0) == 3);
}

TEST_CASE("negative or non-finite ratios are rejected") {
    CHECK_THROWS_AS(classify_drift(-1e-9), std::invalid_argument);
    CHECK_THROWS_AS(classify_drift(std::nan("")), std::invalid_argument);
}

TEST_CASE("classification is monotone in the drift ratio") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double a = rng.uniform(0.0, 0.05);
        const double b = rng.uniform(0.0, 0.05);
        if (a <= b) {
            CHECK(classify_drift(a) <= classify_drift(b));
        } else {
            CHECK(classify_drift(a) >= classify_drift(b));
        }
    }
}
