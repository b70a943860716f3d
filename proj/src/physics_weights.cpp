#include "driftadapt/physics_weights.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "driftadapt/errors.hpp"

namespace driftadapt {

std::string to_string(SigmaMode mode) {
    switch (mode) {
        case SigmaMode::Fixed: return "fixed";
        case SigmaMode::SourceStdPopulation: return "source-std-population";
        case SigmaMode::SourceStdSample: return "source-std-sample";
    }
    throw std::invalid_argument("unknown sigma mode");
}

SigmaMode sigma_mode_from_string(const std::string& s) {
    if (s == "fixed") return SigmaMode::Fixed;
    if (s == "source-std-population") return SigmaMode::SourceStdPopulation;
    if (s == "source-std-sample") return SigmaMode::SourceStdSample;
    throw std::invalid_argument("unknown sigma mode: " + s);
}

double gaussian_similarity(double s, double t, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    const double d = s - t;
    return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

double source_sigma(const std::vector<double>& source_physics, SigmaMode mode, double fixed_sigma) {
    if (mode == SigmaMode::Fixed) {
        if (!(fixed_sigma > 0.0)) throw std::invalid_argument("fixed sigma must be > 0");
        return fixed_sigma;
    }
    const std::size_t n = source_physics.size();
    if (n < 2) throw std::invalid_argument("std sigma modes need at least 2 sources");
    const double mean = std::accumulate(source_physics.begin(), source_physics.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double s : source_physics) ss += (s - mean) * (s - mean);
    if (ss == 0.0) throw DegenerateSigma("all source physics equal; standard deviation is zero");
    const double denom = (mode == SigmaMode::SourceStdPopulation) ? static_cast<double>(n)
                                                                  : static_cast<double>(n - 1);
    return std::sqrt(ss / denom);
}

SourceWeightSet compute_weights(const std::vector<double>& source_physics, double target_physics,
                                SigmaMode mode, double fixed_sigma) {
    if (source_physics.empty()) throw std::invalid_argument("no source physics given");
    SourceWeightSet set;
    set.source_physics = source_physics;
    set.target_physics = target_physics;
    set.sigma_mode = mode;
    set.sigma = source_sigma(source_physics, mode, fixed_sigma);
    set.raw_similarity.reserve(source_physics.size());
    for (double s : source_physics) {
        set.raw_similarity.push_back(gaussian_similarity(s, target_physics, set.sigma));
    }
    const double total = std::accumulate(set.raw_similarity.begin(), set.raw_similarity.end(), 0.0);
    set.weights.reserve(set.raw_similarity.size());
    for (double r : set.raw_similarity) set.weights.push_back(r / total);
    return set;
}

}  // namespace driftadapt
