#include "scoredist/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scoredist {

namespace {

// Threshold such that the top ceil((1-percentile)*n) values satisfy v >= Th.
double top_fraction_threshold(std::vector<double> values, double percentile) {
    if (values.empty()) {
        throw std::invalid_argument("cannot calibrate a threshold from an empty set");
    }
    if (!(percentile > 0.0 && percentile < 1.0)) {
        throw std::invalid_argument("threshold percentile must lie in (0,1)");
    }
    const double raw = (1.0 - percentile) * static_cast<double>(values.size());
    std::size_t top = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    top = std::clamp<std::size_t>(top, 1, values.size());
    std::nth_element(values.begin(), values.begin() + (top - 1), values.end(),
                     std::greater<double>());
    return values[top - 1];
}

}  // namespace

void ReliabilityConfig::validate() const {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("reliability epsilon must be positive");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("reliability lambda must lie in [0,1]");
    }
    if (!(reference_count > 0.0)) {
        throw std::invalid_argument("reference rating count must be positive");
    }
    if (!(threshold_percentile > 0.0 && threshold_percentile < 1.0)) {
        throw std::invalid_argument("threshold percentile must lie in (0,1)");
    }
    if (kurtosis_threshold && !(*kurtosis_threshold > 0.0)) {
        throw std::invalid_argument("kurtosis threshold must be positive");
    }
    if (count_threshold && !(*count_threshold > 0.0)) {
        throw std::invalid_argument("count threshold must be positive");
    }
}

double saturating_weight(double t, double threshold) {
    if (t >= threshold) return 1.0;
    const double lg = std::log(t + 1.0);
    return lg / (lg + 1.0);
}

double kurtosis_statistic(const ScoreHistogram& hist, double epsilon) {
    const DistributionStats stats = distribution_stats(hist);
    return 1.0 / (std::abs(stats.kurtosis - 3.0) + epsilon);
}

double kurtosis_reliability(const ScoreHistogram& hist, const ReliabilityConfig& cfg) {
    if (!cfg.kurtosis_threshold) {
        throw ThresholdNotCalibratedError();
    }
    if (is_degenerate(hist)) return 0.0;
    return saturating_weight(kurtosis_statistic(hist, cfg.epsilon), *cfg.kurtosis_threshold);
}

double calibrate_threshold(std::span<const ScoreHistogram> train_hists, double percentile,
                           double epsilon) {
    std::vector<double> stats;
    stats.reserve(train_hists.size());
    for (const ScoreHistogram& hist : train_hists) {
        if (is_degenerate(hist)) continue;
        stats.push_back(kurtosis_statistic(hist, epsilon));
    }
    if (stats.empty()) {
        throw std::invalid_argument("cannot calibrate a threshold: no usable histograms");
    }
    return top_fraction_threshold(std::move(stats), percentile);
}

double calibrate_count_threshold(std::span<const std::uint64_t> rating_counts,
                                 const ReliabilityConfig& cfg) {
    std::vector<double> normalized;
    normalized.reserve(rating_counts.size());
    for (const std::uint64_t count : rating_counts) {
        if (count == 0) continue;
        normalized.push_back(static_cast<double>(count) / cfg.reference_count);
    }
    if (normalized.empty()) {
        throw std::invalid_argument("cannot calibrate a threshold: no usable rating counts");
    }
    return top_fraction_threshold(std::move(normalized), cfg.threshold_percentile);
}

double rating_count_reliability(std::uint64_t rating_count, const ReliabilityConfig& cfg) {
    if (rating_count == 0) {
        throw std::invalid_argument("rating count must be at least 1");
    }
    if (!cfg.count_threshold) {
        throw ThresholdNotCalibratedError();
    }
    return saturating_weight(static_cast<double>(rating_count) / cfg.reference_count,
                             *cfg.count_threshold);
}

double blended_reliability(double r_kurt, double r_cnt, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("blend lambda must lie in [0,1]");
    }
    if (lambda == 1.0) return r_kurt;
    if (lambda == 0.0) return r_cnt;
    return lambda * r_kurt + (1.0 - lambda) * r_cnt;
}

double weighted_loss(DivergenceKind kind, const ScoreHistogram& truth,
                     const ScoreHistogram& predicted, double reliability, double huber_delta) {
    return reliability * divergence(kind, truth, predicted, huber_delta);
}

}  // namespace scoredist
