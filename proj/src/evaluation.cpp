#include "scoredist/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>

#include "scoredist/numeric.hpp"
#include "scoredist/rng.hpp"

namespace scoredist {

double mean_divergence(std::span<const ScoreHistogram> preds,
                       std::span<const ScoreHistogram> truths, DivergenceKind kind) {
    if (preds.size() != truths.size()) {
        throw std::invalid_argument("mean_divergence: prediction/truth length mismatch");
    }
    if (preds.empty()) {
        throw std::invalid_argument("mean_divergence: empty test set");
    }
    std::vector<double> losses(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        losses[i] = divergence(kind, truths[i], preds[i]);
    }
    return pairwise_sum(losses) / static_cast<double>(losses.size());
}

double MDReport::at(DivergenceKind kind) const {
    for (std::size_t i = 0; i < md_columns.size(); ++i) {
        if (md_columns[i] == kind) return values[i];
    }
    throw std::invalid_argument("divergence kind is not an MD column");
}

MDReport md_report(std::span<const ScoreHistogram> preds,
                   std::span<const ScoreHistogram> truths) {
    MDReport report;
    report.n = preds.size();
    for (std::size_t i = 0; i < md_columns.size(); ++i) {
        report.values[i] = mean_divergence(preds, truths, md_columns[i]);
    }
    return report;
}

std::string Regime::label() const {
    std::string name(to_string(kind));
    for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    switch (mode) {
        case ReliabilityMode::None: return name;
        case ReliabilityMode::Kurtosis: return "RS-" + name;
        case ReliabilityMode::RatingCount: return "RS-" + name + "(ratnum)";
        case ReliabilityMode::Blend: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%g", lambda);
            return "RS-" + name + "(lambda=" + buf + ")";
        }
    }
    return name;
}

std::vector<ScoreHistogram> predict_all(const PredictorParams& params,
                                        std::span<const Sample> samples) {
    std::vector<ScoreHistogram> preds;
    preds.reserve(samples.size());
    for (const Sample& sample : samples) {
        const ForwardTrace trace = forward(params, sample.features);
        preds.push_back(prediction_histogram(trace, sample.target.scale()));
    }
    return preds;
}

namespace {

MDMatrixRow run_regime(const Regime& regime, std::span<const Sample> train_set,
                       std::span<const Sample> test_set, const PredictorConfig& predictor_cfg,
                       const TrainConfig& base_cfg, const ReliabilityConfig& reliability_base,
                       std::uint64_t seed) {
    MDMatrixRow row;
    row.regime = regime;
    row.seed = seed;
    try {
        TrainConfig cfg = base_cfg;
        cfg.loss_kind = regime.kind;
        cfg.reliability_mode = regime.mode;
        cfg.lambda = regime.lambda;
        cfg.seed = seed;

        PredictorConfig pcfg = predictor_cfg;
        pcfg.seed = seed;

        std::optional<ReliabilityConfig> reliability;
        if (regime.mode != ReliabilityMode::None) {
            reliability = calibrate_for_dataset(train_set, regime.mode, reliability_base);
        }

        const TrainReport trained = train(train_set, pcfg, cfg, reliability);
        if (trained.diverged) {
            row.error = "diverged";
            return row;
        }
        row.predictions = predict_all(trained.params, test_set);
        std::vector<ScoreHistogram> truths;
        truths.reserve(test_set.size());
        for (const Sample& sample : test_set) truths.push_back(sample.target);
        row.report = md_report(row.predictions, truths);
        row.ok = true;
    } catch (const std::exception& error) {
        row.ok = false;
        row.error = error.what();
        row.predictions.clear();
    }
    return row;
}

}  // namespace

MDMatrix md_matrix(std::span<const Sample> train_set, std::span<const Sample> test_set,
                   std::span<const Regime> regimes, const PredictorConfig& predictor_cfg,
                   const TrainConfig& base_cfg, const ReliabilityConfig& reliability_base,
                   std::size_t jobs) {
    if (regimes.empty()) {
        throw std::invalid_argument("md_matrix: no regimes given");
    }
    if (train_set.empty() || test_set.empty()) {
        throw std::invalid_argument("md_matrix: empty train or test set");
    }
    if (jobs == 0) jobs = 1;

    // Independent per-regime seeds derived from the base seed.
    std::vector<std::uint64_t> seeds(regimes.size());
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        std::uint64_t stream = base_cfg.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
        seeds[i] = splitmix64(stream);
    }

    MDMatrix matrix;
    matrix.rows.resize(regimes.size());
    for (std::size_t begin = 0; begin < regimes.size(); begin += jobs) {
        const std::size_t end = std::min(begin + jobs, regimes.size());
        std::vector<std::future<MDMatrixRow>> chunk;
        chunk.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            chunk.push_back(std::async(std::launch::async, run_regime, regimes[i], train_set,
                                       test_set, predictor_cfg, base_cfg, reliability_base,
                                       seeds[i]));
        }
        for (std::size_t i = begin; i < end; ++i) {
            matrix.rows[i] = chunk[i - begin].get();
        }
    }
    return matrix;
}

BoxplotSummary boxplot_summary(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("boxplot of an empty group");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();

    // Quartiles by linear interpolation between order statistics.
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };

    BoxplotSummary box;
    box.n = n;
    box.min = values.front();
    box.max = values.back();
    box.q1 = quantile(0.25);
    box.median = quantile(0.5);
    box.q3 = quantile(0.75);

    const double iqr = box.q3 - box.q1;
    const double lo_fence = box.q1 - 1.5 * iqr;
    const double hi_fence = box.q3 + 1.5 * iqr;
    box.whisker_low = box.q3;
    box.whisker_high = box.q1;
    for (const double v : values) {
        if (v < lo_fence || v > hi_fence) {
            box.outliers.push_back(v);
        } else {
            box.whisker_low = std::min(box.whisker_low, v);
            box.whisker_high = std::max(box.whisker_high, v);
        }
    }
    return box;
}

namespace {

std::int64_t bin_of(double value, double width) {
    return static_cast<std::int64_t>(std::floor(value / width));
}

BinRange range_of(std::int64_t index, double width) {
    return BinRange{index, static_cast<double>(index) * width,
                    static_cast<double>(index + 1) * width};
}

std::vector<GroupedBox> grouped_boxes(const std::map<std::int64_t, std::vector<double>>& groups,
                                      double width) {
    std::vector<GroupedBox> out;
    out.reserve(groups.size());
    for (const auto& [index, values] : groups) {
        out.push_back(GroupedBox{range_of(index, width), boxplot_summary(values)});
    }
    return out;
}

}  // namespace

SubjectivenessReport subjectiveness_report(std::span<const ScoreHistogram> hists,
                                           double mean_bin_width, double std_bin_width,
                                           double skew_bin_width) {
    if (hists.empty()) {
        throw std::invalid_argument("subjectiveness report of an empty population");
    }
    if (!(mean_bin_width > 0.0 && std_bin_width > 0.0 && skew_bin_width > 0.0)) {
        throw std::invalid_argument("bin widths must be positive");
    }

    SubjectivenessReport report;
    report.mean_bin_width = mean_bin_width;
    report.std_bin_width = std_bin_width;
    report.skew_bin_width = skew_bin_width;
    report.total_input = hists.size();

    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> grid;
    std::map<std::int64_t, std::vector<double>> skew_by_mean;
    std::map<std::int64_t, std::vector<double>> kurt_by_mean;
    std::map<std::int64_t, std::vector<double>> mean_by_skew;
    std::map<std::int64_t, std::vector<double>> median_by_skew;

    for (const ScoreHistogram& hist : hists) {
        if (is_degenerate(hist)) {
            ++report.degenerate_count;
            continue;
        }
        const DistributionStats stats = distribution_stats(hist);
        const std::int64_t mean_bin = bin_of(stats.mean, mean_bin_width);
        const std::int64_t std_bin = bin_of(std::sqrt(stats.variance), std_bin_width);
        const std::int64_t skew_bin = bin_of(stats.skewness, skew_bin_width);
        ++grid[{mean_bin, std_bin}];
        skew_by_mean[mean_bin].push_back(stats.skewness);
        kurt_by_mean[mean_bin].push_back(stats.kurtosis);
        mean_by_skew[skew_bin].push_back(stats.mean);
        median_by_skew[skew_bin].push_back(stats.median);
    }
    if (report.degenerate_count == report.total_input) {
        throw std::invalid_argument("subjectiveness report: all histograms are degenerate");
    }

    report.grid.reserve(grid.size());
    for (const auto& [key, count] : grid) {
        report.grid.push_back(MeanStdCell{key.first, key.second, count});
    }
    report.skewness_by_mean = grouped_boxes(skew_by_mean, mean_bin_width);
    report.kurtosis_by_mean = grouped_boxes(kurt_by_mean, mean_bin_width);
    for (const auto& [index, means] : mean_by_skew) {
        report.mean_median_by_skew.push_back(MeanMedianGroup{
            range_of(index, skew_bin_width), boxplot_summary(means),
            boxplot_summary(median_by_skew.at(index))});
    }
    return report;
}

}  // namespace scoredist
