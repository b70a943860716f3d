#include "driftadapt/ground_motion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "driftadapt/rng.hpp"

namespace driftadapt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Envelope fractions: linear rise over the first 10%, unit hold over the
// next 60%, linear decay over the final 30%.
constexpr double kRiseFrac = 0.10;
constexpr double kHoldFrac = 0.60;

double envelope(double t, double duration) {
    const double t_rise = kRiseFrac * duration;
    const double t_hold_end = (kRiseFrac + kHoldFrac) * duration;
    if (t <= 0.0) return 0.0;
    if (t < t_rise) return t / t_rise;
    if (t < t_hold_end) return 1.0;
    if (t >= duration) return 0.0;
    return (duration - t) / (duration - t_hold_end);
}

// One filtered-noise component. The shaping filter is a single-mass
// oscillator driven by zero-order-hold white noise; its absolute
// acceleration is the output. The oscillator update is the exact
// discretization of the underdamped system over one step.
std::vector<double> filtered_noise(Rng& rng, std::size_t n, double dt, const SpectralParams& sp) {
    const double wn = 2.0 * kPi * sp.dominant_freq_hz;
    const double z = sp.bandwidth_zeta;
    const double wd = wn * std::sqrt(1.0 - z * z);
    const double sigma_w = 1.0 / std::sqrt(dt);  // keeps variance dt-independent

    // exp(A dt) for state [x, v], plus the particular response to a unit
    // constant input over the step.
    const double e = std::exp(-z * wn * dt);
    const double c = std::cos(wd * dt);
    const double s = std::sin(wd * dt);
    const double a11 = e * (c + z * wn * s / wd);
    const double a12 = e * s / wd;
    const double a21 = -e * wn * wn * s / wd;
    const double a22 = e * (c - z * wn * s / wd);
    // x_p = w/wn^2 for constant input w; homogeneous part handles the rest.
    const double b1 = (1.0 - a11) / (wn * wn);
    const double b2 = -a21 / (wn * wn);

    std::vector<double> out(n, 0.0);
    double x = 0.0, v = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double w = sigma_w * rng.normal();
        const double xn = a11 * x + a12 * v + b1 * w;
        const double vn = a21 * x + a22 * v + b2 * w;
        x = xn;
        v = vn;
        // filter-mass absolute acceleration = -(2 z wn v + wn^2 x)
        out[i + 1] = -(2.0 * z * wn * v + wn * wn * x);
    }
    const double t_total = static_cast<double>(n - 1) * dt;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] *= envelope(static_cast<double>(i) * dt, t_total);
    }
    return out;
}

}  // namespace

double GroundMotion::peak_ground_acceleration() const {
    double peak = 0.0;
    for (double a : accel_x) peak = std::max(peak, std::abs(a));
    for (double a : accel_y) peak = std::max(peak, std::abs(a));
    return peak;
}

GroundMotion synthesize_motion(std::uint64_t seed, double duration, double dt,
                               const SpectralParams& spectral) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
    if (!(spectral.dominant_freq_hz > 0.0)) throw std::invalid_argument("dominant frequency must be > 0");
    if (!(spectral.bandwidth_zeta > 0.0) || spectral.bandwidth_zeta >= 1.0) {
        throw std::invalid_argument("filter bandwidth zeta must lie in (0, 1)");
    }
    const auto n = static_cast<std::size_t>(std::floor(duration / dt + 0.5));
    if (n < 2) throw std::invalid_argument("duration/dt must give at least 2 samples");

    GroundMotion gm;
    gm.id = "gm" + std::to_string(seed);
    gm.dt = dt;
    gm.n_steps = n;
    gm.seed = seed;
    gm.scale_factor = 1.0;
    Rng rng_x(derive_seed(seed, "motion-x"));
    Rng rng_y(derive_seed(seed, "motion-y"));
    gm.accel_x = filtered_noise(rng_x, n, dt, spectral);
    gm.accel_y = filtered_noise(rng_y, n, dt, spectral);
    return gm;
}

GroundMotion scale_motion(const GroundMotion& motion, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be > 0");
    GroundMotion out = motion;
    for (double& a : out.accel_x) a *= factor;
    for (double& a : out.accel_y) a *= factor;
    out.scale_factor = motion.scale_factor * factor;
    return out;
}

}  // namespace driftadapt
