#include "driftadapt/labels.hpp"

#include <cmath>
#include <stdexcept>

namespace driftadapt {

StoryDriftSummary peak_drift_ratio(const ResponseRecord& record, std::size_t story,
                                   double story_height) {
    if (story < 1 || story > record.n_stories) {
        throw std::invalid_argument("story index out of range");
    }
    if (!(story_height > 0.0)) throw std::invalid_argument("story height must be > 0");
    double peak = 0.0;
    for (int ax = 0; ax < 2; ++ax) {
        for (double d : record.drift[ax][story - 1]) {
            const double mag = std::abs(d);
            if (mag > peak) peak = mag;
        }
    }
    return {peak, story_height, peak / story_height};
}

int classify_drift(double drift_ratio) {
    if (drift_ratio < 0.0 || !std::isfinite(drift_ratio)) {
        throw std::invalid_argument("drift ratio must be finite and >= 0");
    }
    if (drift_ratio < 0.01) return 1;
    if (drift_ratio < 0.02) return 2;
    return 3;
}

}  // namespace driftadapt
