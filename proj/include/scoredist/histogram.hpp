#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scoredist/errors.hpp"

namespace scoredist {

// Ordered rating levels R_1 < ... < R_Z of an ordinal scale (Z >= 2).
class RatingScale {
public:
    explicit RatingScale(std::vector<double> level_values);

    // Consecutive integer levels 1..z.
    static RatingScale integer_levels(std::size_t z);

    std::size_t num_levels() const { return levels_.size(); }
    std::span<const double> level_values() const { return levels_; }
    double level(std::size_t i) const { return levels_[i]; }
    double min_level() const { return levels_.front(); }
    double max_level() const { return levels_.back(); }

    friend bool operator==(const RatingScale&, const RatingScale&) = default;

private:
    std::vector<double> levels_;
};

// The standard ten-point scale 1..10.
const RatingScale& default_scale();

// Raw ordinal ratings aggregated as a count per level.
class RatingSet {
public:
    RatingSet(RatingScale scale, std::vector<std::uint64_t> counts);

    const RatingScale& scale() const { return scale_; }
    std::span<const std::uint64_t> counts() const { return counts_; }
    std::uint64_t total_ratings() const { return total_; }  // L

private:
    RatingScale scale_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// Normalized score histogram h(1..Z): each entry in [0,1], summing to 1
// within 1e-9. The canonical distribution representation everything else
// consumes.
class ScoreHistogram {
public:
    ScoreHistogram(RatingScale scale, std::vector<double> probs);

    const RatingScale& scale() const { return scale_; }
    std::span<const double> probs() const { return probs_; }
    double prob(std::size_t i) const { return probs_[i]; }
    std::size_t num_bins() const { return probs_.size(); }

private:
    RatingScale scale_;
    std::vector<double> probs_;
};

// Running sum Y(i) of a score histogram: nondecreasing, Y(Z) = 1.
class CumulativeHistogram {
public:
    CumulativeHistogram(RatingScale scale, std::vector<double> cum);

    const RatingScale& scale() const { return scale_; }
    std::span<const double> cum() const { return cum_; }
    std::size_t num_bins() const { return cum_.size(); }

private:
    RatingScale scale_;
    std::vector<double> cum_;
};

// Moment statistics of a score histogram, in rating units. Skewness and
// kurtosis use population central moments of the histogram itself (no
// sample-bias correction); kurtosis of a normal shape is 3.
struct DistributionStats {
    double mean = 0.0;
    double median = 0.0;  // smallest level with CDF >= 0.5
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

// probs[i] = counts[i] / L. Throws std::invalid_argument("empty ratings")
// when L == 0.
ScoreHistogram histogram_from_ratings(const RatingSet& ratings);

CumulativeHistogram cumulative(const ScoreHistogram& hist);

// Throws DegenerateDistributionError for zero-variance (point mass) input.
DistributionStats distribution_stats(const ScoreHistogram& hist);

// True when the entire mass sits in one bin (variance zero).
bool is_degenerate(const ScoreHistogram& hist);

}  // namespace scoredist
