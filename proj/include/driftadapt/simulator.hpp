#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "driftadapt/building.hpp"
#include "driftadapt/ground_motion.hpp"

namespace driftadapt {

// Per-level absolute accelerations (level 0 = ground) and per-story drift
// histories for both horizontal axes. Axis index 0 = x, 1 = y.
struct ResponseRecord {
    std::string building_id;
    std::string motion_id;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t n_stories = 0;
    double scale_factor = 1.0;
    // abs_accel[axis][level][step], level in 0..n_stories
    std::array<std::vector<std::vector<double>>, 2> abs_accel;
    // drift[axis][story-1][step], story in 1..n_stories
    std::array<std::vector<std::vector<double>>, 2> drift;
};

// Full integrator state trace for one axis; used by the energy and
// consistency checks.
struct AxisHistory {
    std::vector<std::vector<double>> disp;         // [level-1][step], relative to ground
    std::vector<std::vector<double>> vel;          // [level-1][step]
    std::vector<std::vector<double>> accel;        // [level-1][step], relative
    std::vector<std::vector<double>> story_force;  // [story-1][step]
    std::vector<double> ground_accel;              // [step]
};

struct SimulationDetail {
    ResponseRecord record;
    std::array<AxisHistory, 2> axis;  // x, y
};

struct SimulatorOptions {
    double newton_rel_tol = 1e-8;
    std::size_t newton_max_iter = 50;
    double max_dt = 0.02;  // material state update stability bound
    // Optional initial state, one entry per level; empty means at rest.
    // Springs start on the virgin loading branch consistent with the
    // initial drifts.
    std::vector<double> initial_displacement;
    std::vector<double> initial_velocity;
};

// Integrates the x and y axes as independent planar systems: Newmark
// gamma=1/2, beta=1/4, Newton iteration on the dynamic residual, Rayleigh
// damping anchored per spec, bilinear hysteretic story shear.
ResponseRecord simulate_response(const BuildingSpec& building, const GroundMotion& motion,
                                 const SimulatorOptions& options = {});

SimulationDetail simulate_response_detailed(const BuildingSpec& building, const GroundMotion& motion,
                                            const SimulatorOptions& options = {});

}  // namespace driftadapt
