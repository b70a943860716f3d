#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace driftadapt {

// Planar lumped-mass shear building, one translational DOF per floor per
// axis. Story shear follows a bilinear law with kinematic hardening.
struct BuildingSpec {
    std::string id;
    std::size_t n_stories = 0;
    std::vector<double> mass;           // kg, per story
    std::vector<double> height;         // m, per story
    std::vector<double> stiffness;      // N/m, elastic story stiffness
    std::vector<double> yield_disp;     // m, story drift at yield
    double post_yield_ratio = 0.05;     // in [0, 1)
    double damping_ratio = 0.05;        // in (0, 0.2]
    double damping_anchor_hz_low = 0.0;   // Rayleigh anchors, strictly increasing
    double damping_anchor_hz_high = 0.0;

    void validate() const;  // throws std::invalid_argument on violation
};

// Undamped natural frequencies (Hz, ascending) of the initial elastic
// model.
std::vector<double> modal_frequencies_hz(const BuildingSpec& spec);

// Mass/stiffness proportional damping coefficients giving damping_ratio
// exactly at both anchor frequencies: C = a0 M + a1 K.
struct RayleighCoefficients {
    double a0 = 0.0;
    double a1 = 0.0;
};
RayleighCoefficients rayleigh_coefficients(const BuildingSpec& spec);

// Uniform building with the Rayleigh anchors placed at the first and
// third elastic modes (first and 3x first when fewer than three stories).
BuildingSpec make_uniform_building(const std::string& id, std::size_t n_stories, double story_mass,
                                   double story_height, double story_stiffness, double yield_disp,
                                   double post_yield_ratio = 0.05, double damping_ratio = 0.05);

}  // namespace driftadapt
