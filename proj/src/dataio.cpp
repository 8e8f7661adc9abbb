#include "scoredist/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "scoredist/numeric.hpp"
#include "scoredist/rng.hpp"

namespace scoredist {

std::uint64_t AvaRecord::total_ratings() const {
    return std::accumulate(rating_counts.begin(), rating_counts.end(), std::uint64_t{0});
}

namespace {

bool parse_ava_line(const std::string& line, AvaRecord& record, std::string& message) {
    std::istringstream fields(line);
    std::vector<long long> values;
    long long v = 0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
        message = "non-integer field";
        return false;
    }
    if (values.size() != 15) {
        message = "expected 15 fields, got " + std::to_string(values.size());
        return false;
    }
    for (std::size_t i = 2; i < 12; ++i) {
        if (values[i] < 0) {
            message = "negative rating count";
            return false;
        }
    }
    record.record_id = values[0];
    record.image_id = values[1];
    for (std::size_t i = 0; i < 10; ++i) {
        record.rating_counts[i] = static_cast<std::uint64_t>(values[2 + i]);
    }
    record.semantic_tag_ids = {values[12], values[13]};
    record.challenge_id = values[14];
    return true;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

AvaParseResult parse_ava_metadata(std::istream& in, bool strict) {
    AvaParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        AvaRecord record;
        std::string message;
        if (parse_ava_line(line, record, message)) {
            result.records.push_back(record);
        } else if (strict) {
            throw DataFormatError("line " + std::to_string(line_no) + ": " + message);
        } else {
            result.errors.push_back({line_no, message});
        }
    }
    return result;
}

AvaParseResult parse_ava_metadata_file(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) {
        throw DataFormatError("cannot open metadata file: " + path);
    }
    return parse_ava_metadata(in, strict);
}

std::unordered_map<std::int64_t, std::vector<double>> load_feature_table(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataFormatError("cannot open feature table: " + path);
    }
    std::unordered_map<std::int64_t, std::vector<double>> table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        std::istringstream fields(line);
        std::int64_t id = 0;
        if (!(fields >> id)) {
            throw DataFormatError("feature table line " + std::to_string(line_no) +
                                  ": missing image id");
        }
        std::vector<double> features;
        double x = 0.0;
        while (fields >> x) features.push_back(x);
        if (!fields.eof() || features.empty()) {
            throw DataFormatError("feature table line " + std::to_string(line_no) +
                                  ": malformed feature values");
        }
        table[id] = std::move(features);
    }
    return table;
}

std::vector<double> stats_features(const ScoreHistogram& target, std::uint64_t rating_count) {
    double mean = 0.0, variance = 0.0, skewness = 0.0, kurtosis = 3.0;
    if (is_degenerate(target)) {
        for (std::size_t i = 0; i < target.num_bins(); ++i) {
            if (target.prob(i) > 0.0) mean = target.scale().level(i);
        }
    } else {
        const DistributionStats stats = distribution_stats(target);
        mean = stats.mean;
        variance = stats.variance;
        skewness = stats.skewness;
        kurtosis = stats.kurtosis;
    }
    return {mean, variance, skewness, kurtosis, static_cast<double>(rating_count) / 210.0};
}

SampleBuildResult records_to_samples(std::span<const AvaRecord> records,
                                     const FeatureSource& source, bool strict) {
    SampleBuildResult result;
    result.samples.reserve(records.size());
    for (const AvaRecord& record : records) {
        const std::uint64_t total = record.total_ratings();
        if (total == 0) {
            ++result.skipped_no_ratings;
            continue;
        }
        std::vector<std::uint64_t> counts(record.rating_counts.begin(),
                                          record.rating_counts.end());
        ScoreHistogram target =
            histogram_from_ratings(RatingSet(default_scale(), std::move(counts)));

        std::vector<double> features;
        if (source) {
            std::optional<std::vector<double>> looked_up = source(record.image_id);
            if (!looked_up) {
                if (strict) {
                    throw DataFormatError("no feature vector for image id " +
                                          std::to_string(record.image_id));
                }
                ++result.skipped_missing_features;
                continue;
            }
            features = std::move(*looked_up);
        } else {
            features = stats_features(target, total);
        }
        result.samples.push_back(
            Sample{std::move(features), std::move(target), total, record.image_id});
    }
    return result;
}

void SyntheticSpec::validate() const {
    if (n_samples == 0) {
        throw std::invalid_argument("synthetic spec needs n_samples >= 1");
    }
    if (feature_dim == 0) {
        throw std::invalid_argument("synthetic spec needs feature_dim >= 1");
    }
    if (!(fraction_skewed >= 0.0 && fraction_skewed <= 1.0)) {
        throw std::invalid_argument("fraction_skewed must lie in [0,1]");
    }
    if (rating_count_min == 0 || rating_count_max < rating_count_min) {
        throw std::invalid_argument("rating count range must satisfy 1 <= min <= max");
    }
    if (label_noise < 0.0) {
        throw std::invalid_argument("label_noise must be nonnegative");
    }
}

namespace {

constexpr double kScaleMid = 5.5;

// Two-piece Gaussian discretized onto the integer bins 1..10. A positive
// asymmetry widens the right flank, producing positive skewness. The mode
// is shifted so the resulting mean stays near `location` instead of being
// dragged toward the longer tail, keeping the population's means spread
// across the scale.
std::vector<double> two_piece_bell(double location, double spread, double asymmetry) {
    const double sigma_left = spread * (1.0 - asymmetry);
    const double sigma_right = spread * (1.0 + asymmetry);
    const double mean_shift = std::sqrt(2.0 / std::numbers::pi) * (sigma_right - sigma_left);
    const double center = location - mean_shift;
    std::vector<double> probs(10);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double x = static_cast<double>(i + 1);
        const double sigma = x < center ? sigma_left : sigma_right;
        const double d = (x - center) / sigma;
        probs[i] = std::exp(-0.5 * d * d);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::vector<std::uint64_t> sample_ratings(std::span<const double> probs, std::uint64_t count,
                                          Rng& rng) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;
    std::vector<std::uint64_t> counts(probs.size(), 0);
    for (std::uint64_t k = 0; k < count; ++k) {
        const double u = rng.uniform();
        const std::size_t bin =
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        ++counts[std::min(bin, counts.size() - 1)];
    }
    return counts;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    // Fixed random projection rows used to embed the latents into the
    // feature vector; drawn before the per-sample stream so the dataset is
    // a pure function of the spec.
    const std::size_t projected = spec.feature_dim > 3 ? spec.feature_dim - 3 : 0;
    std::vector<std::array<double, 4>> projection(projected);
    for (auto& row : projection) {
        for (double& e : row) e = rng.uniform(-1.5, 1.5);
    }

    std::vector<Sample> all;
    all.reserve(spec.n_samples);
    for (std::size_t n = 0; n < spec.n_samples; ++n) {
        const double location = rng.uniform(3.0, 8.0);
        const double spread = rng.uniform(0.9, 2.0);
        double asymmetry = 0.0;
        if (rng.uniform() < spec.fraction_skewed) {
            // Mean-dependent injection: low means skew right, high means
            // skew left, echoing the rating-scale edge effect.
            asymmetry = 0.45 * std::tanh(0.55 * (kScaleMid - location)) +
                        rng.uniform(-0.04, 0.04);
            asymmetry = std::clamp(asymmetry, -0.55, 0.55);
        }

        const std::vector<double> ideal = two_piece_bell(location, spread, asymmetry);
        const std::uint64_t ratings =
            rng.uniform_int(spec.rating_count_min, spec.rating_count_max);
        std::vector<std::uint64_t> counts = sample_ratings(ideal, ratings, rng);
        ScoreHistogram target =
            histogram_from_ratings(RatingSet(default_scale(), std::move(counts)));

        const std::array<double, 4> latents = {(location - kScaleMid) / 2.5,
                                               (spread - 1.45) / 0.55, asymmetry, 1.0};
        std::vector<double> features(spec.feature_dim, 0.0);
        for (std::size_t j = 0; j < spec.feature_dim; ++j) {
            if (j < 3) {
                features[j] = latents[j];
            } else {
                const auto& row = projection[j - 3];
                double dot = 0.0;
                for (std::size_t k = 0; k < 4; ++k) dot += row[k] * latents[k];
                features[j] = std::tanh(dot);
            }
        }
        if (spec.label_noise > 0.0) {
            for (double& f : features) f += spec.label_noise * rng.normal();
        }
        all.push_back(Sample{std::move(features), std::move(target), ratings,
                             static_cast<std::int64_t>(n)});
    }

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t test_count = all.size() / 10;

    SyntheticDataset dataset;
    dataset.test.reserve(test_count);
    dataset.train.reserve(all.size() - test_count);
    for (std::size_t i = 0; i < order.size(); ++i) {
        Sample& sample = all[order[i]];
        if (i < test_count) {
            dataset.test.push_back(std::move(sample));
        } else {
            dataset.train.push_back(std::move(sample));
        }
    }
    return dataset;
}

std::size_t corrupt_to_heavy_tailed(std::vector<Sample>& samples, double fraction,
                                    std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("corruption fraction must lie in [0,1]");
    }
    Rng rng(seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(samples.size())));

    for (std::size_t i = 0; i < count; ++i) {
        Sample& sample = samples[order[i]];
        const std::size_t z = sample.target.num_bins();
        // Sharp spike at one end of the scale, slivers of mass at the far
        // end and mid-scale: strongly leptokurtic and systematically biased
        // away from the feature-implied shape, the way extreme-voting
        // raters corrupt a score distribution.
        const bool high_end = rng.uniform() < 0.5;
        const std::size_t spike =
            high_end ? z - 2 + rng.uniform_index(2) : rng.uniform_index(2);
        const double far_sliver = rng.uniform(0.03, 0.07);
        const double mid_sliver = rng.uniform(0.03, 0.07);
        std::vector<double> probs(z, 0.0);
        probs[high_end ? 0 : z - 1] = far_sliver;
        probs[z / 2] += mid_sliver;
        probs[spike] += 1.0 - far_sliver - mid_sliver;
        sample.target = ScoreHistogram(sample.target.scale(), std::move(probs));
    }
    return count;
}

namespace {

constexpr std::string_view kSamplesMagic = "# scoredist-samples v1";

void append_sample_line(std::string& out, const Sample& sample, std::int64_t fallback_id) {
    out += std::to_string(sample.source_id.value_or(fallback_id));
    out += ' ';
    out += std::to_string(sample.rating_count);
    for (const double p : sample.target.probs()) {
        out += ' ';
        out += format_double(p);
    }
    out += ' ';
    out += std::to_string(sample.features.size());
    for (const double f : sample.features) {
        out += ' ';
        out += format_double(f);
    }
    out += '\n';
}

}  // namespace

void save_samples(const std::string& path, std::span<const Sample> samples) {
    const std::size_t z = samples.empty() ? 10 : samples[0].target.num_bins();
    std::string out(kSamplesMagic);
    out += " z " + std::to_string(z) + " count " + std::to_string(samples.size()) + "\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].target.num_bins() != z) {
            throw std::invalid_argument("all samples in one file must share a scale");
        }
        append_sample_line(out, samples[i], static_cast<std::int64_t>(i));
    }
    std::ofstream file(path);
    if (!file) {
        throw DataFormatError("cannot write samples file: " + path);
    }
    file << out;
}

std::vector<Sample> load_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataFormatError("cannot open samples file: " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind(kSamplesMagic, 0) != 0) {
        throw DataFormatError("not a scoredist samples file: " + path);
    }
    std::istringstream header(line.substr(kSamplesMagic.size()));
    std::string key;
    std::size_t z = 0, count = 0;
    if (!(header >> key >> z) || key != "z" || !(header >> key >> count) || key != "count" ||
        z < 2) {
        throw DataFormatError("malformed samples header: " + path);
    }
    const RatingScale scale = z == 10 ? default_scale() : RatingScale::integer_levels(z);

    std::vector<Sample> samples;
    samples.reserve(count);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        std::istringstream fields(line);
        std::int64_t id = 0;
        std::uint64_t ratings = 0;
        if (!(fields >> id >> ratings)) {
            throw DataFormatError("samples line " + std::to_string(line_no) + ": bad id/count");
        }
        std::vector<double> probs(z);
        for (double& p : probs) {
            if (!(fields >> p)) {
                throw DataFormatError("samples line " + std::to_string(line_no) +
                                      ": truncated probabilities");
            }
        }
        std::size_t feature_len = 0;
        if (!(fields >> feature_len)) {
            throw DataFormatError("samples line " + std::to_string(line_no) +
                                  ": missing feature length");
        }
        std::vector<double> features(feature_len);
        for (double& f : features) {
            if (!(fields >> f)) {
                throw DataFormatError("samples line " + std::to_string(line_no) +
                                      ": truncated features");
            }
        }
        samples.push_back(Sample{std::move(features), ScoreHistogram(scale, std::move(probs)),
                                 ratings, id});
    }
    if (samples.size() != count) {
        throw DataFormatError("samples file record count mismatch: expected " +
                              std::to_string(count) + ", found " +
                              std::to_string(samples.size()));
    }
    return samples;
}

std::uint64_t dataset_digest(std::span<const Sample> samples) {
    std::string buffer;
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        buffer.clear();
        append_sample_line(buffer, samples[i], static_cast<std::int64_t>(i));
        digest = fnv1a64(buffer, digest);
    }
    return digest;
}

namespace {

constexpr std::string_view kCheckpointMagic = "scoredist-checkpoint v1";

std::string checkpoint_payload(const PredictorParams& params) {
    std::string payload;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const LinearLayer& layer = params.layers[l];
        payload += "layer " + std::to_string(l) + ' ' + std::to_string(layer.in) + ' ' +
                   std::to_string(layer.out) + '\n';
        for (std::size_t r = 0; r < layer.out; ++r) {
            payload += 'w';
            for (std::size_t c = 0; c < layer.in; ++c) {
                payload += ' ';
                payload += format_double(layer.weights[r * layer.in + c]);
            }
            payload += '\n';
        }
        payload += 'b';
        for (const double b : layer.bias) {
            payload += ' ';
            payload += format_double(b);
        }
        payload += '\n';
    }
    payload += "end\n";
    return payload;
}

char hex_digit(std::uint64_t nibble) {
    return nibble < 10 ? static_cast<char>('0' + nibble) : static_cast<char>('a' + nibble - 10);
}

std::string hex64(std::uint64_t value) {
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex_digit(value & 0xf);
        value >>= 4;
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const PredictorParams& params) {
    const PredictorConfig& config = params.config;
    const std::string payload = checkpoint_payload(params);

    std::string out(kCheckpointMagic);
    out += '\n';
    out += "seed " + std::to_string(config.seed) + '\n';
    out += "input_dim " + std::to_string(config.input_dim) + '\n';
    out += "hidden_dims " + std::to_string(config.hidden_dims.size());
    for (const std::size_t dim : config.hidden_dims) out += ' ' + std::to_string(dim);
    out += '\n';
    out += "num_bins " + std::to_string(config.num_bins) + '\n';
    out += "activation relu\n";
    out += "digest " + hex64(fnv1a64(payload)) + '\n';
    out += payload;

    std::ofstream file(path);
    if (!file) {
        throw CheckpointError("cannot write checkpoint: " + path);
    }
    file << out;
}

PredictorParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw CheckpointError("cannot open checkpoint: " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw CheckpointError("checkpoint version mismatch (expected '" +
                              std::string(kCheckpointMagic) + "')");
    }

    PredictorConfig config;
    std::string expected_digest;
    for (;;) {
        if (!std::getline(in, line)) {
            throw CheckpointError("truncated checkpoint header");
        }
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        if (key == "seed") {
            fields >> config.seed;
        } else if (key == "input_dim") {
            fields >> config.input_dim;
        } else if (key == "hidden_dims") {
            std::size_t n = 0;
            fields >> n;
            config.hidden_dims.assign(n, 0);
            for (std::size_t& dim : config.hidden_dims) fields >> dim;
        } else if (key == "num_bins") {
            fields >> config.num_bins;
        } else if (key == "activation") {
            std::string name;
            fields >> name;
            if (name != "relu") {
                throw CheckpointError("unknown activation in checkpoint: " + name);
            }
        } else if (key == "digest") {
            fields >> expected_digest;
            break;
        } else {
            throw CheckpointError("unknown checkpoint header field: " + key);
        }
        if (fields.fail()) {
            throw CheckpointError("malformed checkpoint header line: " + line);
        }
    }

    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (hex64(fnv1a64(payload)) != expected_digest) {
        throw CheckpointError("checkpoint digest check failed");
    }

    PredictorParams params;
    params.config = config;
    const std::vector<std::size_t> sizes = config.layer_sizes();

    std::istringstream body(payload);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::string key;
        std::size_t index = 0;
        LinearLayer layer;
        if (!(body >> key >> index >> layer.in >> layer.out) || key != "layer" || index != l) {
            throw CheckpointError("truncated or malformed checkpoint layer block");
        }
        if (layer.in != sizes[l] || layer.out != sizes[l + 1]) {
            throw CheckpointError("checkpoint layer shape mismatch against its config");
        }
        layer.weights.resize(layer.in * layer.out);
        for (std::size_t r = 0; r < layer.out; ++r) {
            if (!(body >> key) || key != "w") {
                throw CheckpointError("truncated checkpoint weight block");
            }
            for (std::size_t c = 0; c < layer.in; ++c) {
                if (!(body >> layer.weights[r * layer.in + c])) {
                    throw CheckpointError("truncated checkpoint weight row");
                }
            }
        }
        if (!(body >> key) || key != "b") {
            throw CheckpointError("truncated checkpoint bias block");
        }
        layer.bias.resize(layer.out);
        for (double& b : layer.bias) {
            if (!(body >> b)) {
                throw CheckpointError("truncated checkpoint bias values");
            }
        }
        params.layers.push_back(std::move(layer));
    }
    std::string tail;
    if (!(body >> tail) || tail != "end") {
        throw CheckpointError("checkpoint missing end marker");
    }
    return params;
}

}  // namespace scoredist
