#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace driftadapt {

// Simulation failed to advance: Newton non-convergence or non-finite state.
// Carries the step index at which integration broke down.
class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// On-disk artifact does not match its manifest (truncated blob, bad
// checksum, shape mismatch).
class CorruptDataset : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Config or artifact schema violation; message names the offending field.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Campaign produced a degenerate dataset (e.g. an empty damage class).
class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All source physics descriptors equal: standard deviation is zero and the
// Gaussian kernel is undefined.
class DegenerateSigma : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite value met during loss or gradient evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace driftadapt
