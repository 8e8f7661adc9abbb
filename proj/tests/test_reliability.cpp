#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scoredist/reliability.hpp"

using namespace scoredist;

namespace {

ScoreHistogram near_normal(double mean, double sigma) {
    return ScoreHistogram(default_scale(), oracles::gaussian_bin_probs(mean, sigma, 10));
}

ScoreHistogram point_mass(std::size_t bin) {
    std::vector<double> probs(10, 0.0);
    probs[bin] = 1.0;
    return ScoreHistogram(default_scale(), std::move(probs));
}

// Heavy spike with slivers at both ends: kurtosis far above 3.
ScoreHistogram heavy_tailed(std::size_t spike) {
    std::vector<double> probs(10, 0.0);
    probs[0] = 0.05;
    probs[9] = 0.05;
    probs[spike] = 0.9;
    return ScoreHistogram(default_scale(), std::move(probs));
}

}  // namespace

TEST_CASE("saturating weight values") {
    const double mu_at_one = std::log(2.0) / (std::log(2.0) + 1.0);
    CHECK(mu_at_one == doctest::Approx(0.4094).epsilon(1e-4));
    CHECK(saturating_weight(1.0, 2.0) == doctest::Approx(mu_at_one).epsilon(1e-12));
    CHECK(saturating_weight(2.0, 2.0) == 1.0);   // at the threshold
    CHECK(saturating_weight(50.0, 2.0) == 1.0);  // above it
    CHECK(saturating_weight(1e-9, 2.0) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("saturating weight is strictly increasing below the threshold") {
    const double threshold = 25.0;
    double prev = saturating_weight(1e-6, threshold);
    for (double t = 0.1; t < threshold; t += 0.1) {
        const double cur = saturating_weight(t, threshold);
        CHECK(cur > prev);
        prev = cur;
    }
    CHECK(prev < 1.0);  // the jump at Th is deliberate
}

TEST_CASE("kurtosis statistic and reliability") {
    ReliabilityConfig cfg;
    SUBCASE("threshold must be calibrated first") {
        CHECK_THROWS_AS(kurtosis_reliability(near_normal(5.5, 1.6), cfg),
                        ThresholdNotCalibratedError);
    }
    SUBCASE("kurtosis near 3 gives a huge statistic and weight 1") {
        const ScoreHistogram hist = near_normal(5.5, 1.2);
        const double t = kurtosis_statistic(hist, cfg.epsilon);
        CHECK(t > 10.0);  // |kurtosis - 3| is small
        cfg.kurtosis_threshold = 5.0;
        CHECK(kurtosis_reliability(hist, cfg) == 1.0);
    }
    SUBCASE("kurtosis far from 3 drives the weight toward 0") {
        const ScoreHistogram hist = heavy_tailed(4);
        const double t = kurtosis_statistic(hist, cfg.epsilon);
        CHECK(t < 0.2);
        cfg.kurtosis_threshold = 5.0;
        CHECK(kurtosis_reliability(hist, cfg) < 0.2);
        CHECK(kurtosis_reliability(hist, cfg) > 0.0);
    }
    SUBCASE("degenerate histograms get weight 0") {
        cfg.kurtosis_threshold = 5.0;
        CHECK(kurtosis_reliability(point_mass(3), cfg) == 0.0);
        CHECK_THROWS_AS(kurtosis_statistic(point_mass(3), cfg.epsilon),
                        DegenerateDistributionError);
    }
}

TEST_CASE("threshold calibration marks exactly the top decile") {
    // Rating counts produce T values 1..100 through L / L-bar with L-bar=1.
    ReliabilityConfig cfg;
    cfg.reference_count = 1.0;
    std::vector<std::uint64_t> counts(100);
    for (std::size_t i = 0; i < 100; ++i) counts[i] = i + 1;
    const double threshold = calibrate_count_threshold(counts, cfg);
    CHECK(threshold == 91.0);  // 10th largest of 1..100

    cfg.count_threshold = threshold;
    std::size_t saturated = 0;
    for (const std::uint64_t count : counts) {
        if (rating_count_reliability(count, cfg) == 1.0) ++saturated;
    }
    CHECK(saturated == 10);  // ceil(10% of 100)
}

TEST_CASE("kurtosis threshold calibration excludes degenerates and hits the decile") {
    Rng rng(909);
    std::vector<ScoreHistogram> hists;
    for (int i = 0; i < 200; ++i) {
        hists.push_back(ScoreHistogram(default_scale(),
                                       oracles::random_interior_histogram(rng, 10)));
    }
    hists.push_back(point_mass(2));  // excluded from calibration
    const double threshold = calibrate_threshold(hists, 0.90);

    ReliabilityConfig cfg;
    cfg.kurtosis_threshold = threshold;
    std::size_t saturated = 0;
    for (const ScoreHistogram& hist : hists) {
        if (kurtosis_reliability(hist, cfg) == 1.0) ++saturated;
    }
    CHECK(saturated == 20);  // ceil(10% of 200), the degenerate one is weight 0
}

TEST_CASE("identical histograms calibrate to their common statistic") {
    std::vector<ScoreHistogram> hists(25, near_normal(5.0, 1.4));
    const double threshold = calibrate_threshold(hists, 0.90);
    CHECK(threshold ==
          doctest::Approx(kurtosis_statistic(hists[0], 1e-6)).epsilon(1e-15));
    CHECK_THROWS_AS(calibrate_threshold({}, 0.90), std::invalid_argument);
}

TEST_CASE("rating count reliability") {
    ReliabilityConfig cfg;
    cfg.count_threshold = 2.0;  // L >= 420 saturates
    CHECK_THROWS_AS(rating_count_reliability(0, cfg), std::invalid_argument);
    CHECK(rating_count_reliability(1000, cfg) == 1.0);
    // L / L-bar = 1 sits below the threshold.
    CHECK(rating_count_reliability(210, cfg) ==
          doctest::Approx(std::log(2.0) / (std::log(2.0) + 1.0)).epsilon(1e-12));
    double prev = 0.0;
    for (std::uint64_t count = 1; count <= 600; count += 7) {
        const double r = rating_count_reliability(count, cfg);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("blended reliability") {
    CHECK(blended_reliability(0.8, 0.4, 1.0) == 0.8);
    CHECK(blended_reliability(0.8, 0.4, 0.0) == 0.4);
    CHECK(blended_reliability(0.8, 0.4, 0.5) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK_THROWS_AS(blended_reliability(0.8, 0.4, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(blended_reliability(0.8, 0.4, -0.1), std::invalid_argument);
}

TEST_CASE("weighted loss is a bit-exact scalar multiple") {
    Rng rng(111);
    const ScoreHistogram y(default_scale(), oracles::random_interior_histogram(rng, 10));
    const ScoreHistogram q(default_scale(), oracles::random_interior_histogram(rng, 10));
    for (const DivergenceKind kind : all_divergence_kinds) {
        const double plain = divergence(kind, y, q);
        CHECK(weighted_loss(kind, y, q, 1.0) == plain);
        CHECK(weighted_loss(kind, y, q, 0.0) == 0.0);
        CHECK(weighted_loss(kind, y, q, 0.37) == 0.37 * plain);
    }
    // Monotone in r for a fixed pair.
    CHECK(weighted_loss(DivergenceKind::Cjs, y, q, 0.2) <
          weighted_loss(DivergenceKind::Cjs, y, q, 0.9));
}

TEST_CASE("weighted loss example: half of the disjoint two-bin cjs") {
    const ScoreHistogram a(RatingScale::integer_levels(2), {1.0, 0.0});
    const ScoreHistogram b(RatingScale::integer_levels(2), {0.0, 1.0});
    CHECK(weighted_loss(DivergenceKind::Cjs, a, b, 0.5) ==
          doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("reliability config validation") {
    ReliabilityConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lambda = 1.2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.lambda = 0.5;
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
