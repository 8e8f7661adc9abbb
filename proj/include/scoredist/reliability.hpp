#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "scoredist/divergence.hpp"
#include "scoredist/histogram.hpp"

namespace scoredist {

// Settings for reliability-sensitive sample weighting. The thresholds are
// resolved from a training-set percentile by the calibrate_* functions and
// must be filled in before any weight is computed.
struct ReliabilityConfig {
    double epsilon = 1e-6;            // guards 1/|kurtosis - 3| against division by zero
    double lambda = 1.0;              // blend: 1 = pure kurtosis, 0 = pure rating count
    double reference_count = 210.0;   // L̄, the typical number of ratings per item
    double threshold_percentile = 0.90;

    std::optional<double> kurtosis_threshold;  // Th over T(y) values
    std::optional<double> count_threshold;     // Th over L / L̄ values

    void validate() const;
};

// Saturating map μ: 1 when t >= threshold, otherwise ln(t+1)/(ln(t+1)+1).
// Strictly increasing below the threshold, with a deliberate jump at it.
double saturating_weight(double t, double threshold);

// T(y) = 1 / (|kurtosis(y) - 3| + ε). Throws DegenerateDistributionError
// for zero-variance histograms.
double kurtosis_statistic(const ScoreHistogram& hist, double epsilon);

// Kurtosis-based reliability weight in [0,1]. Degenerate histograms get
// weight 0. Throws ThresholdNotCalibratedError when the kurtosis threshold
// is unresolved.
double kurtosis_reliability(const ScoreHistogram& hist, const ReliabilityConfig& cfg);

// Resolve Th so that exactly the top ceil((1 - percentile) * n) of the
// training T values sit at or above it (degenerate histograms excluded).
// `epsilon` must match the one used when weights are computed later.
double calibrate_threshold(std::span<const ScoreHistogram> train_hists,
                           double percentile = 0.90, double epsilon = 1e-6);

// Same policy over the normalized rating counts L / L̄.
double calibrate_count_threshold(std::span<const std::uint64_t> rating_counts,
                                 const ReliabilityConfig& cfg);

// Rating-count reliability weight μ(L / L̄); monotone nondecreasing in L.
double rating_count_reliability(std::uint64_t rating_count, const ReliabilityConfig& cfg);

// λ·r_kurt + (1-λ)·r_cnt. The endpoints return the operand unchanged.
double blended_reliability(double r_kurt, double r_cnt, double lambda);

// r · l^kind(y, ŷ): a plain scalar multiply of the divergence value.
double weighted_loss(DivergenceKind kind, const ScoreHistogram& truth,
                     const ScoreHistogram& predicted, double reliability,
                     double huber_delta = 1.0);

}  // namespace scoredist
