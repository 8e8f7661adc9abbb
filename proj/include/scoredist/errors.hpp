#pragma once

#include <stdexcept>
#include <string>

namespace scoredist {

// Two histograms built on different rating scales were combined.
class ScaleMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Zero-variance (single-bin) distribution: skewness and kurtosis are
// undefined. Reliability weighting maps this state to weight 0 instead
// of propagating the error.
class DegenerateDistributionError : public std::domain_error {
public:
    DegenerateDistributionError() : std::domain_error("degenerate distribution: zero variance") {}
    using std::domain_error::domain_error;
};

// Analytic gradient requested at a point where a logarithmic divergence
// is not differentiable (a predicted bin at or below the boundary).
class GradientBoundaryError : public std::domain_error {
public:
    GradientBoundaryError() : std::domain_error("gradient undefined at boundary") {}
    using std::domain_error::domain_error;
};

// A reliability weight was requested before the threshold Th was
// resolved from its training-set percentile.
class ThresholdNotCalibratedError : public std::logic_error {
public:
    ThresholdNotCalibratedError() : std::logic_error("threshold not calibrated") {}
    using std::logic_error::logic_error;
};

// Non-finite gradient reached the optimizer; the run aborts with a report.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError() : std::runtime_error("diverged") {}
    using std::runtime_error::runtime_error;
};

// Checkpoint file cannot be read back: bad version, digest, or shape.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input data in strict parsing mode.
class DataFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scoredist
