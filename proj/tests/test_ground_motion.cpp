#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driftadapt/ground_motion.hpp"

using namespace driftadapt;

TEST_CASE("same seed gives bit-identical records") {
    const auto a = synthesize_motion(7, 20.0, 0.02);
    const auto b = synthesize_motion(7, 20.0, 0.02);
    REQUIRE(a.n_steps == b.n_steps);
    CHECK(a.accel_x == b.accel_x);
    CHECK(a.accel_y == b.accel_y);
}

TEST_CASE("components start at exactly zero") {
    for (std::uint64_t seed : {1ULL, 7ULL, 12345ULL}) {
        const auto gm = synthesize_motion(seed, 10.0, 0.01);
        CHECK(gm.accel_x[0] == 0.0);
        CHECK(gm.accel_y[0] == 0.0);
    }
}

TEST_CASE("different seeds differ somewhere") {
    const auto a = synthesize_motion(7, 20.0, 0.02);
    const auto b = synthesize_motion(8, 20.0, 0.02);
    CHECK(a.accel_x != b.accel_x);
}

TEST_CASE("components are independent streams") {
    const auto gm = synthesize_motion(3, 20.0, 0.02);
    CHECK(gm.accel_x != gm.accel_y);
}

TEST_CASE("synthesis validates its arguments") {
    CHECK_THROWS_AS(synthesize_motion(1, 10.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 10.0, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 0.0, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 0.005, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 10.0, 0.01, {0.0, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 10.0, 0.01, {2.5, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(synthesize_motion(1, 10.0, 0.01, {2.5, 1.0}), std::invalid_argument);
}

TEST_CASE("unit scale is the identity") {
    const auto gm = synthesize_motion(7, 20.0, 0.02);
    const auto scaled = scale_motion(gm, 1.0);
    CHECK(scaled.accel_x == gm.accel_x);
    CHECK(scaled.accel_y == gm.accel_y);
    CHECK(scaled.scale_factor == gm.scale_factor);
}

TEST_CASE("doubling the scale doubles the peak") {
    const auto gm = synthesize_motion(7, 20.0, 0.02);
    const auto scaled = scale_motion(gm, 2.0);
    CHECK(scaled.peak_ground_acceleration() == 2.0 * gm.peak_ground_acceleration());
    CHECK(scaled.scale_factor == 2.0);
}

TEST_CASE("halving then doubling recovers the record") {
    const auto gm = synthesize_motion(7, 20.0, 0.02);
    const auto back = scale_motion(scale_motion(gm, 0.5), 2.0);
    for (std::size_t i = 0; i < gm.n_steps; ++i) {
        const double ref = gm.accel_x[i];
        if (ref == 0.0) {
            CHECK(back.accel_x[i] == 0.0);
        } else {
            CHECK(std::abs(back.accel_x[i] - ref) <= 1e-12 * std::abs(ref));
        }
    }
    CHECK(back.scale_factor == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("non-positive scale factors are rejected") {
    const auto gm = synthesize_motion(7, 5.0, 0.02);
    CHECK_THROWS_AS(scale_motion(gm, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(scale_motion(gm, -2.0), std::invalid_argument);
}
