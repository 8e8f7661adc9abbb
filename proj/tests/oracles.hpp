// Test-only reference implementations, kept independent of the library
// code paths they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "scoredist/rng.hpp"

namespace oracles {

struct Moments {
    double mean = 0.0;
    double median = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

// Expand the rating multiset (level i repeated counts[i] times) and compute
// plain sample moments with denominator L.
inline Moments brute_force_moments(std::span<const std::uint64_t> counts,
                                   std::span<const double> levels) {
    std::vector<double> values;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::uint64_t k = 0; k < counts[i]; ++k) values.push_back(levels[i]);
    }
    const double n = static_cast<double>(values.size());

    Moments m;
    for (const double v : values) m.mean += v;
    m.mean /= n;
    double m3 = 0.0, m4 = 0.0;
    for (const double v : values) {
        const double d = v - m.mean;
        m.variance += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m.variance /= n;
    m3 /= n;
    m4 /= n;
    m.skewness = m3 / std::pow(m.variance, 1.5);
    m.kurtosis = m4 / (m.variance * m.variance);

    // Median: smallest level whose cumulative share reaches one half.
    std::uint64_t total = 0;
    for (const std::uint64_t c : counts) total += c;
    std::uint64_t running = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        running += counts[i];
        if (2 * running >= total) {
            m.median = levels[i];
            break;
        }
    }
    return m;
}

// Straight-line evaluation of the symmetric cumulative Jensen-Shannon
// divergence: build both CDFs, then sum the two log-ratio series.
inline double straight_line_cjs(std::span<const double> y1, std::span<const double> y2) {
    const std::size_t z = y1.size();
    std::vector<double> c1(z), c2(z);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        a += y1[i];
        b += y2[i];
        c1[i] = a;
        c2[i] = b;
    }
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        const double mid = 0.5 * c1[i] + 0.5 * c2[i];
        if (c1[i] > 0.0) first += c1[i] * std::log2(c1[i] / mid);
        if (c2[i] > 0.0) second += c2[i] * std::log2(c2[i] / mid);
    }
    return 0.5 * (first + second);
}

// Central finite differences of a scalar function at x, one coordinate at
// a time.
inline std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f, std::vector<double> x,
    double h = 1e-5) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double gradcheck_relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Interior histogram with every bin comfortably above the perturbation
// step of the finite-difference checks.
inline std::vector<double> random_interior_histogram(scoredist::Rng& rng, std::size_t z) {
    std::vector<double> probs(z);
    double sum = 0.0;
    for (double& p : probs) {
        p = 0.1 + rng.uniform();
        sum += p;
    }
    for (double& p : probs) p /= sum;
    return probs;
}

// Normal-distribution mass per integer-centered bin, via erf differences.
inline std::vector<double> gaussian_bin_probs(double mean, double sigma, std::size_t z) {
    const auto cdf = [&](double x) {
        return 0.5 * (1.0 + std::erf((x - mean) / (sigma * std::sqrt(2.0))));
    };
    std::vector<double> probs(z);
    double sum = 0.0;
    for (std::size_t i = 0; i < z; ++i) {
        const double lo = static_cast<double>(i + 1) - 0.5;
        const double hi = static_cast<double>(i + 1) + 0.5;
        probs[i] = cdf(hi) - cdf(lo);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

}  // namespace oracles
