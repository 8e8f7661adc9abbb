#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "scoredist/dataio.hpp"

using namespace scoredist;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("scoredist-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

bool params_equal(const PredictorParams& a, const PredictorParams& b) {
    if (a.config.input_dim != b.config.input_dim || a.config.num_bins != b.config.num_bins ||
        a.config.hidden_dims != b.config.hidden_dims || a.config.seed != b.config.seed) {
        return false;
    }
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights != b.layers[l].weights) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("ava metadata line parsing") {
    std::istringstream in("1 953619 0 1 5 17 38 36 15 6 5 1 1 22 1396\n");
    const AvaParseResult result = parse_ava_metadata(in);
    REQUIRE(result.records.size() == 1);
    CHECK(result.errors.empty());
    const AvaRecord& record = result.records[0];
    CHECK(record.record_id == 1);
    CHECK(record.image_id == 953619);
    const std::array<std::uint64_t, 10> expected = {0, 1, 5, 17, 38, 36, 15, 6, 5, 1};
    CHECK(record.rating_counts == expected);
    CHECK(record.total_ratings() == 124);
    CHECK(record.semantic_tag_ids[0] == 1);
    CHECK(record.semantic_tag_ids[1] == 22);
    CHECK(record.challenge_id == 1396);
}

TEST_CASE("ava metadata error handling") {
    SUBCASE("empty input yields no records and no errors") {
        std::istringstream in("");
        const AvaParseResult result = parse_ava_metadata(in);
        CHECK(result.records.empty());
        CHECK(result.errors.empty());
    }
    SUBCASE("lenient mode collects malformed lines with numbers") {
        std::istringstream in(
            "1 10 1 1 1 1 1 1 1 1 1 1 0 0 5\n"
            "2 11 1 1 1 1 1 1 1 1 1 0 0 5\n"  // 14 fields
            "3 x 1 1 1 1 1 1 1 1 1 1 0 0 5\n");
        const AvaParseResult result = parse_ava_metadata(in, false);
        CHECK(result.records.size() == 1);
        REQUIRE(result.errors.size() == 2);
        CHECK(result.errors[0].line == 2);
        CHECK(result.errors[1].line == 3);
    }
    SUBCASE("strict mode throws at the first malformed line") {
        std::istringstream in(
            "1 10 1 1 1 1 1 1 1 1 1 1 0 0 5\n"
            "2 11 1 1 1 1 1 1 1 1 1 0 0 5\n");
        CHECK_THROWS_AS(parse_ava_metadata(in, true), DataFormatError);
    }
    SUBCASE("unreadable file") {
        CHECK_THROWS_AS(parse_ava_metadata_file("/nonexistent/path/ava.txt"), DataFormatError);
    }
}

TEST_CASE("records_to_samples") {
    AvaRecord good;
    good.image_id = 7;
    good.rating_counts = {0, 0, 2, 6, 10, 12, 8, 2, 0, 0};
    AvaRecord degenerate_votes;
    degenerate_votes.image_id = 8;
    degenerate_votes.rating_counts = {0, 0, 0, 0, 44, 0, 0, 0, 0, 0};
    AvaRecord empty;
    empty.image_id = 9;

    const std::vector<AvaRecord> records = {good, degenerate_votes, empty};

    SUBCASE("stats-features fallback") {
        const SampleBuildResult result = records_to_samples(records);
        CHECK(result.samples.size() == 2);
        CHECK(result.skipped_no_ratings == 1);
        CHECK(result.samples[0].rating_count == 40);
        CHECK(result.samples[0].source_id == 7);
        double sum = 0.0;
        for (std::size_t i = 0; i < 10; ++i) sum += result.samples[0].target.prob(i);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(result.samples[0].features.size() == 5);
        // Degenerate targets still get a feature vector.
        CHECK(result.samples[1].features.size() == 5);
        CHECK(is_degenerate(result.samples[1].target));
    }
    SUBCASE("feature table source with a missing id") {
        const FeatureSource source = [](std::int64_t id) -> std::optional<std::vector<double>> {
            if (id == 7) return std::vector<double>{1.0, 2.0};
            return std::nullopt;
        };
        const SampleBuildResult lenient = records_to_samples(records, source, false);
        CHECK(lenient.samples.size() == 1);
        CHECK(lenient.skipped_missing_features == 1);
        CHECK(lenient.skipped_no_ratings == 1);
        CHECK_THROWS_AS(records_to_samples(records, source, true), DataFormatError);
    }
}

TEST_CASE("feature table loading") {
    TempDir dir;
    {
        std::ofstream out(dir.file("features.txt"));
        out << "7 0.5 -1.25 3\n9 1 2 3\n";
    }
    const auto table = load_feature_table(dir.file("features.txt"));
    REQUIRE(table.size() == 2);
    CHECK(table.at(7) == std::vector<double>{0.5, -1.25, 3.0});
    CHECK_THROWS_AS(load_feature_table(dir.file("missing.txt")), DataFormatError);
}

TEST_CASE("synthetic generation is a pure function of the spec") {
    SyntheticSpec spec;
    spec.n_samples = 300;
    spec.feature_dim = 8;
    spec.seed = 4242;
    const SyntheticDataset a = generate_synthetic(spec);
    const SyntheticDataset b = generate_synthetic(spec);
    CHECK(a.train.size() == 270);
    CHECK(a.test.size() == 30);
    CHECK(dataset_digest(a.train) == dataset_digest(b.train));
    CHECK(dataset_digest(a.test) == dataset_digest(b.test));

    spec.seed = 4243;
    const SyntheticDataset c = generate_synthetic(spec);
    CHECK(dataset_digest(a.train) != dataset_digest(c.train));

    for (const Sample& sample : a.train) {
        CHECK(sample.rating_count >= spec.rating_count_min);
        CHECK(sample.rating_count <= spec.rating_count_max);
        CHECK(sample.features.size() == 8);
    }
}

TEST_CASE("fraction_skewed zero concentrates skewness near zero") {
    SyntheticSpec spec;
    spec.n_samples = 400;
    spec.feature_dim = 4;
    spec.fraction_skewed = 0.0;
    spec.seed = 99;
    const SyntheticDataset data = generate_synthetic(spec);
    std::vector<double> skews;
    for (const Sample& sample : data.train) {
        if (is_degenerate(sample.target)) continue;
        skews.push_back(distribution_stats(sample.target).skewness);
    }
    std::sort(skews.begin(), skews.end());
    const double median = skews[skews.size() / 2];
    CHECK(std::abs(median) < 0.1);
}

TEST_CASE("heavy-tailed corruption pushes kurtosis far from 3") {
    SyntheticSpec spec;
    spec.n_samples = 200;
    spec.feature_dim = 4;
    spec.fraction_skewed = 0.0;
    spec.seed = 1234;
    SyntheticDataset data = generate_synthetic(spec);
    const std::uint64_t before = dataset_digest(data.train);
    const std::size_t corrupted = corrupt_to_heavy_tailed(data.train, 0.15, 9);
    CHECK(corrupted == 27);  // round(0.15 * 180)
    CHECK(dataset_digest(data.train) != before);

    std::size_t far_from_normal = 0;
    for (const Sample& sample : data.train) {
        if (is_degenerate(sample.target)) continue;
        const double kurt = distribution_stats(sample.target).kurtosis;
        if (std::abs(kurt - 3.0) > 4.0) ++far_from_normal;
    }
    CHECK(far_from_normal >= corrupted);
    CHECK(corrupt_to_heavy_tailed(data.train, 0.0, 9) == 0);
}

TEST_CASE("samples file round trip") {
    SyntheticSpec spec;
    spec.n_samples = 50;
    spec.feature_dim = 6;
    spec.label_noise = 0.25;
    spec.seed = 31337;
    const SyntheticDataset data = generate_synthetic(spec);

    TempDir dir;
    save_samples(dir.file("samples.txt"), data.train);
    const std::vector<Sample> loaded = load_samples(dir.file("samples.txt"));
    REQUIRE(loaded.size() == data.train.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].features == data.train[i].features);  // bit-exact
        CHECK(loaded[i].rating_count == data.train[i].rating_count);
        for (std::size_t b = 0; b < 10; ++b) {
            CHECK(loaded[i].target.prob(b) == data.train[i].target.prob(b));
        }
    }
    CHECK(dataset_digest(loaded) == dataset_digest(data.train));

    SUBCASE("missing and malformed files") {
        CHECK_THROWS_AS(load_samples(dir.file("nope.txt")), DataFormatError);
        std::ofstream out(dir.file("bad.txt"));
        out << "not a samples file\n";
        out.close();
        CHECK_THROWS_AS(load_samples(dir.file("bad.txt")), DataFormatError);
    }
    SUBCASE("truncated record is reported with its line") {
        std::ifstream in(dir.file("samples.txt"));
        std::stringstream buffer;
        buffer << in.rdbuf();
        std::string text = buffer.str();
        text.resize(text.size() - 40);  // chop the tail
        std::ofstream out(dir.file("truncated.txt"));
        out << text;
        out.close();
        CHECK_THROWS_AS(load_samples(dir.file("truncated.txt")), DataFormatError);
    }
}

TEST_CASE("samples files carry non-default scales") {
    const RatingScale seven = RatingScale::integer_levels(7);
    std::vector<Sample> samples;
    for (int i = 0; i < 5; ++i) {
        std::vector<std::uint64_t> counts(7, 1);
        counts[static_cast<std::size_t>(i)] = 4 + static_cast<std::uint64_t>(i);
        samples.push_back(Sample{{0.5 * i, -0.25 * i},
                                 histogram_from_ratings(RatingSet(seven, counts)),
                                 10 + static_cast<std::uint64_t>(i), i});
    }
    TempDir dir;
    save_samples(dir.file("seven.txt"), samples);
    const std::vector<Sample> loaded = load_samples(dir.file("seven.txt"));
    REQUIRE(loaded.size() == 5);
    CHECK(loaded[0].target.scale() == seven);
    CHECK(dataset_digest(loaded) == dataset_digest(samples));
}

TEST_CASE("checkpoint round trip is bit-exact") {
    PredictorConfig config;
    config.input_dim = 16;
    config.hidden_dims = {64};
    config.num_bins = 10;
    config.seed = 271828;
    const PredictorParams params = init_params(config);

    TempDir dir;
    const std::string path = dir.file("checkpoint.txt");
    save_checkpoint(path, params);
    const PredictorParams loaded = load_checkpoint(path);
    CHECK(params_equal(params, loaded));

    SUBCASE("digest corruption is caught and named") {
        std::ifstream in(path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        std::string text = buffer.str();
        const std::size_t pos = text.rfind("0.");
        text[pos + 2] = text[pos + 2] == '1' ? '2' : '1';
        std::ofstream out(dir.file("tampered.txt"));
        out << text;
        out.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("tampered.txt")),
                             "checkpoint digest check failed", CheckpointError);
    }
    SUBCASE("version mismatch") {
        std::ofstream out(dir.file("old.txt"));
        out << "scoredist-checkpoint v0\n";
        out.close();
        CHECK_THROWS_AS(load_checkpoint(dir.file("old.txt")), CheckpointError);
    }
    SUBCASE("truncated file") {
        std::ifstream in(path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        std::string text = buffer.str();
        text.resize(text.size() / 2);
        std::ofstream out(dir.file("short.txt"));
        out << text;
        out.close();
        CHECK_THROWS_AS(load_checkpoint(dir.file("short.txt")), CheckpointError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint(dir.file("absent.txt")), CheckpointError);
    }
}

TEST_CASE("stats features flag degenerate targets gracefully") {
    std::vector<double> probs(10, 0.0);
    probs[6] = 1.0;
    const ScoreHistogram degenerate(default_scale(), probs);
    const std::vector<double> features = stats_features(degenerate, 210);
    REQUIRE(features.size() == 5);
    CHECK(features[0] == 7.0);  // mean of the point mass
    CHECK(features[1] == 0.0);  // variance placeholder
    CHECK(features[4] == doctest::Approx(1.0));
}
