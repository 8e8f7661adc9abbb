#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scoredist/histogram.hpp"
#include "scoredist/predictor.hpp"

namespace scoredist {

// One line of an AVA-style metadata index: 15 whitespace-separated integer
// fields. rating_counts[i] is the number of votes for score i+1.
struct AvaRecord {
    std::int64_t record_id = 0;
    std::int64_t image_id = 0;
    std::array<std::uint64_t, 10> rating_counts{};
    std::array<std::int64_t, 2> semantic_tag_ids{};
    std::int64_t challenge_id = 0;

    std::uint64_t total_ratings() const;  // L
};

struct AvaParseResult {
    struct LineError {
        std::size_t line = 0;
        std::string message;
    };
    std::vector<AvaRecord> records;
    std::vector<LineError> errors;  // empty in strict mode (strict throws)
};

// Lenient mode collects malformed lines with their numbers; strict mode
// throws DataFormatError at the first one.
AvaParseResult parse_ava_metadata(std::istream& in, bool strict = false);
AvaParseResult parse_ava_metadata_file(const std::string& path, bool strict = false);

// A training/evaluation example: features in, target score histogram out,
// with the raw rating count kept for reliability weighting.
struct Sample {
    std::vector<double> features;
    ScoreHistogram target;
    std::uint64_t rating_count = 0;  // L
    std::optional<std::int64_t> source_id;
};

// Maps an image id to its feature vector, or nullopt when unknown.
using FeatureSource = std::function<std::optional<std::vector<double>>(std::int64_t)>;

// Whitespace table "image_id v1 ... vD", one image per line.
std::unordered_map<std::int64_t, std::vector<double>> load_feature_table(
    const std::string& path);

// Pipeline-smoke fallback: features from the target histogram's own
// moments plus L. This leaks the label into the input; never use it for a
// claimed result.
std::vector<double> stats_features(const ScoreHistogram& target, std::uint64_t rating_count);

struct SampleBuildResult {
    std::vector<Sample> samples;
    std::size_t skipped_no_ratings = 0;
    std::size_t skipped_missing_features = 0;
};

// An empty `source` selects the stats-features fallback. In strict mode a
// missing feature vector throws DataFormatError.
SampleBuildResult records_to_samples(std::span<const AvaRecord> records,
                                     const FeatureSource& source = {}, bool strict = false);

// Recipe for the synthetic benchmark: unimodal rating distributions on the
// ten-point scale with mean-dependent skew injection, finite-rater
// multinomial noise, and features deterministically embedded from the
// generating latents.
struct SyntheticSpec {
    std::size_t n_samples = 0;
    std::size_t feature_dim = 16;
    double fraction_skewed = 0.38;
    std::uint64_t rating_count_min = 78;
    std::uint64_t rating_count_max = 549;
    double label_noise = 0.0;  // magnitude of seeded feature noise
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticDataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

// Pure function of the spec: same spec, same dataset. 90/10 train/test
// split by seeded shuffle.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Replace the targets of round(fraction * n) seeded-random samples with
// heavy-tailed spike-plus-outlier histograms (|kurtosis - 3| large),
// detached from the features. Returns the number corrupted.
std::size_t corrupt_to_heavy_tailed(std::vector<Sample>& samples, double fraction,
                                    std::uint64_t seed);

// Sample dataset files: a one-line header, then one record per line
// (id, L, Z probabilities at 17 significant digits, feature length,
// feature values).
void save_samples(const std::string& path, std::span<const Sample> samples);
std::vector<Sample> load_samples(const std::string& path);

// Order-sensitive content digest used in run manifests.
std::uint64_t dataset_digest(std::span<const Sample> samples);

// Versioned line-oriented text checkpoints. load(save(p)) == p bit for
// bit. Throws CheckpointError for version, digest, truncation, or shape
// problems.
void save_checkpoint(const std::string& path, const PredictorParams& params);
PredictorParams load_checkpoint(const std::string& path);

}  // namespace scoredist
