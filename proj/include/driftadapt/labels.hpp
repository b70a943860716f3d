#pragma once

#include <cstddef>

#include "driftadapt/simulator.hpp"

namespace driftadapt {

struct StoryDriftSummary {
    double delta_max = 0.0;    // m, peak |drift| over time and both axes
    double story_height = 0.0; // m
    double drift_ratio = 0.0;  // delta_max / story_height
};

StoryDriftSummary peak_drift_ratio(const ResponseRecord& record, std::size_t story,
                                   double story_height);

// Damage class bins, half-open on the left: [0, 1%) -> 1, [1%, 2%) -> 2,
// [2%, inf) -> 3.
int classify_drift(double drift_ratio);

}  // namespace driftadapt
