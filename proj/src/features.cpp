#include "driftadapt/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "driftadapt/errors.hpp"

namespace driftadapt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kFirTaps = 63;  // odd: symmetric, zero group delay

// Hamming-windowed sinc low-pass, DC gain normalized to exactly 1.
std::vector<double> design_lowpass(double cutoff_norm) {
    std::vector<double> taps(kFirTaps);
    const auto mid = static_cast<double>(kFirTaps - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < kFirTaps; ++i) {
        const double t = static_cast<double>(i) - mid;
        const double sinc = (t == 0.0) ? 2.0 * cutoff_norm
                                       : std::sin(2.0 * kPi * cutoff_norm * t) / (kPi * t);
        const double window = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                                     static_cast<double>(kFirTaps - 1));
        taps[i] = sinc * window;
        sum += taps[i];
    }
    for (double& h : taps) h /= sum;
    return taps;
}

}  // namespace

std::vector<double> resample_series(const std::vector<double>& series, double input_rate,
                                    double target_rate) {
    if (!(input_rate > 0.0) || !(target_rate > 0.0)) {
        throw std::invalid_argument("rates must be > 0");
    }
    const double ratio = input_rate / target_rate;
    const auto factor = static_cast<std::size_t>(std::floor(ratio + 0.5));
    if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
        throw std::invalid_argument("target rate must divide the input rate");
    }
    if (factor == 1) return series;

    const std::size_t n = series.size();
    if (n == 0) return {};
    // Cut off at 80% of the output Nyquist band.
    const auto taps = design_lowpass(0.4 * target_rate / input_rate);
    const auto mid = static_cast<std::ptrdiff_t>(kFirTaps / 2);

    const std::size_t n_out = (n + factor - 1) / factor;
    std::vector<double> out(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
        const auto center = static_cast<std::ptrdiff_t>(j * factor);
        double acc = 0.0;
        for (std::size_t k = 0; k < kFirTaps; ++k) {
            auto idx = center + static_cast<std::ptrdiff_t>(k) - mid;
            idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1);
            acc += taps[k] * series[static_cast<std::size_t>(idx)];
        }
        out[j] = acc;
    }
    return out;
}

std::vector<double> extract_features(const ResponseRecord& record, std::size_t story,
                                     std::size_t length, double target_rate) {
    if (story < 1 || story > record.n_stories) {
        throw std::invalid_argument("story index out of range");
    }
    if (length == 0) throw std::invalid_argument("feature length must be > 0");
    const double input_rate = 1.0 / record.dt;

    // Channel order: lower x, lower y, upper x, upper y.
    const std::vector<double>* channels[4] = {
        &record.abs_accel[0][story - 1], &record.abs_accel[1][story - 1],
        &record.abs_accel[0][story], &record.abs_accel[1][story]};

    std::vector<std::vector<double>> resampled(4);
    for (int c = 0; c < 4; ++c) {
        resampled[c] = resample_series(*channels[c], input_rate, target_rate);
    }
    const std::size_t n_r = resampled[0].size();
    if (2 * n_r < length) {
        throw InsufficientData("record yields " + std::to_string(n_r) + " samples after resampling; need at least " +
                               std::to_string((length + 1) / 2));
    }

    std::vector<double> out(length * 4, 0.0);
    const std::size_t n_copy = std::min(n_r, length);
    for (std::size_t t = 0; t < n_copy; ++t) {
        for (int c = 0; c < 4; ++c) {
            out[t * 4 + static_cast<std::size_t>(c)] = resampled[c][t];
        }
    }
    return out;
}

}  // namespace driftadapt
