#include "scoredist/histogram.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace scoredist {

namespace {
constexpr double kSumTolerance = 1e-9;
}

RatingScale::RatingScale(std::vector<double> level_values) : levels_(std::move(level_values)) {
    if (levels_.size() < 2) {
        throw std::invalid_argument("rating scale needs at least 2 levels");
    }
    for (std::size_t i = 1; i < levels_.size(); ++i) {
        if (!(levels_[i - 1] < levels_[i])) {
            throw std::invalid_argument("rating scale levels must be strictly increasing");
        }
    }
}

RatingScale RatingScale::integer_levels(std::size_t z) {
    std::vector<double> levels(z);
    for (std::size_t i = 0; i < z; ++i) levels[i] = static_cast<double>(i + 1);
    return RatingScale(std::move(levels));
}

const RatingScale& default_scale() {
    static const RatingScale scale = RatingScale::integer_levels(10);
    return scale;
}

RatingSet::RatingSet(RatingScale scale, std::vector<std::uint64_t> counts)
    : scale_(std::move(scale)), counts_(std::move(counts)) {
    if (counts_.size() != scale_.num_levels()) {
        throw std::invalid_argument("rating counts must have one entry per scale level");
    }
    total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ScoreHistogram::ScoreHistogram(RatingScale scale, std::vector<double> probs)
    : scale_(std::move(scale)), probs_(std::move(probs)) {
    if (probs_.size() != scale_.num_levels()) {
        throw std::invalid_argument("histogram must have one probability per scale level");
    }
    double sum = 0.0;
    for (const double p : probs_) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw std::invalid_argument("histogram probabilities must lie in [0,1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw std::invalid_argument("histogram probabilities must sum to 1");
    }
}

CumulativeHistogram::CumulativeHistogram(RatingScale scale, std::vector<double> cum)
    : scale_(std::move(scale)), cum_(std::move(cum)) {
    if (cum_.size() != scale_.num_levels()) {
        throw std::invalid_argument("cumulative histogram must have one entry per scale level");
    }
    double prev = 0.0;
    for (const double c : cum_) {
        if (!std::isfinite(c) || c < prev - kSumTolerance || c > 1.0 + kSumTolerance) {
            throw std::invalid_argument("cumulative histogram must be nondecreasing in [0,1]");
        }
        prev = c;
    }
    if (std::abs(cum_.back() - 1.0) > kSumTolerance) {
        throw std::invalid_argument("cumulative histogram must end at 1");
    }
}

ScoreHistogram histogram_from_ratings(const RatingSet& ratings) {
    const std::uint64_t total = ratings.total_ratings();
    if (total == 0) {
        throw std::invalid_argument("empty ratings");
    }
    std::vector<double> probs(ratings.counts().size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = static_cast<double>(ratings.counts()[i]) / static_cast<double>(total);
    }
    return ScoreHistogram(ratings.scale(), std::move(probs));
}

CumulativeHistogram cumulative(const ScoreHistogram& hist) {
    std::vector<double> cum(hist.num_bins());
    double running = 0.0;
    for (std::size_t i = 0; i < cum.size(); ++i) {
        running += hist.prob(i);
        cum[i] = running;
    }
    // Σh is 1 only within tolerance; pin the last entry so downstream CDF
    // invariants hold exactly.
    cum.back() = 1.0;
    return CumulativeHistogram(hist.scale(), std::move(cum));
}

bool is_degenerate(const ScoreHistogram& hist) {
    std::size_t support = 0;
    for (std::size_t i = 0; i < hist.num_bins(); ++i) {
        if (hist.prob(i) > 0.0) ++support;
    }
    return support <= 1;
}

DistributionStats distribution_stats(const ScoreHistogram& hist) {
    const auto probs = hist.probs();
    const auto levels = hist.scale().level_values();
    const std::size_t z = hist.num_bins();

    double mean = 0.0;
    for (std::size_t i = 0; i < z; ++i) mean += probs[i] * levels[i];

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        const double d = levels[i] - mean;
        const double d2 = d * d;
        m2 += probs[i] * d2;
        m3 += probs[i] * d2 * d;
        m4 += probs[i] * d2 * d2;
    }
    if (m2 <= 0.0) {
        throw DegenerateDistributionError();
    }

    // Smallest level whose CDF reaches one half. The slack absorbs rounding
    // in the running sum: count-based histograms have CDF values on a grid
    // of 1/L, so anything within 1e-9 of 0.5 is exactly 0.5 in rationals.
    double median = levels[z - 1];
    double cdf = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        cdf += probs[i];
        if (cdf >= 0.5 - 1e-9) {
            median = levels[i];
            break;
        }
    }

    DistributionStats stats;
    stats.mean = mean;
    stats.median = median;
    stats.variance = m2;
    stats.skewness = m3 / std::pow(m2, 1.5);
    stats.kurtosis = m4 / (m2 * m2);
    return stats;
}

}  // namespace scoredist
