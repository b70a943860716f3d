#pragma once

#include <string>
#include <vector>

namespace driftadapt {

enum class SigmaMode {
    Fixed,                // use the configured constant
    SourceStdPopulation,  // population std of the source physics
    SourceStdSample,      // sample std (n-1 denominator)
};

std::string to_string(SigmaMode mode);
SigmaMode sigma_mode_from_string(const std::string& s);

// Gaussian-kernel similarities between per-story physics descriptors and
// the normalized per-source training weights derived from them.
struct SourceWeightSet {
    std::vector<double> source_physics;
    double target_physics = 0.0;
    double sigma = 0.0;
    SigmaMode sigma_mode = SigmaMode::Fixed;
    std::vector<double> raw_similarity;  // each in (0, 1]
    std::vector<double> weights;         // normalized, sum == 1
};

// exp(-(s-t)^2 / (2 sigma^2)); sigma must be positive.
double gaussian_similarity(double s, double t, double sigma);

// Standard deviation of the source physics under the given mode. Fixed
// mode returns fixed_sigma unchanged. Requires >= 2 sources; all-equal
// physics under a std mode raises DegenerateSigma.
double source_sigma(const std::vector<double>& source_physics, SigmaMode mode, double fixed_sigma = 0.0);

SourceWeightSet compute_weights(const std::vector<double>& source_physics, double target_physics,
                                SigmaMode mode, double fixed_sigma = 0.0);

}  // namespace driftadapt
