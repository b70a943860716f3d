#pragma once

#include <cstddef>
#include <vector>

#include "driftadapt/simulator.hpp"

namespace driftadapt {

// Anti-alias low-pass (windowed-sinc FIR, edge-replicated, zero phase)
// followed by integer decimation. target_rate must divide the input rate.
std::vector<double> resample_series(const std::vector<double>& series, double input_rate,
                                    double target_rate);

// The four-channel acceleration feature of one story: lower slab x/y then
// upper slab x/y (level story-1 and level story; level 0 is the ground
// motion itself). Resampled to target_rate, then truncated or tail
// zero-padded to exactly length samples. Row-major length x 4.
std::vector<double> extract_features(const ResponseRecord& record, std::size_t story,
                                     std::size_t length, double target_rate);

}  // namespace driftadapt
