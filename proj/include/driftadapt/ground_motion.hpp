#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace driftadapt {

// Second-order filter shaping the white-noise excitation spectrum.
struct SpectralParams {
    double dominant_freq_hz = 2.5;  // filter resonance
    double bandwidth_zeta = 0.6;    // filter damping; controls spectral width
};

// Biaxial ground acceleration time series. Both components have n_steps
// samples at spacing dt and start at exactly zero.
struct GroundMotion {
    std::string id;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::vector<double> accel_x;  // m/s^2
    std::vector<double> accel_y;  // m/s^2
    double scale_factor = 1.0;
    std::uint64_t seed = 0;

    double peak_ground_acceleration() const;  // max |a| over both components
};

// Filtered Gaussian white noise under a trapezoidal rise-hold-decay
// amplitude envelope; the two components use independent noise streams.
// Deterministic for a given seed.
GroundMotion synthesize_motion(std::uint64_t seed, double duration, double dt,
                               const SpectralParams& spectral = {});

// Multiplies every sample by factor (> 0) and folds factor into
// scale_factor.
GroundMotion scale_motion(const GroundMotion& motion, double factor);

}  // namespace driftadapt
