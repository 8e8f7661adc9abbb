#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scoredist/dataio.hpp"
#include "scoredist/divergence.hpp"
#include "scoredist/histogram.hpp"
#include "scoredist/trainer.hpp"

namespace scoredist {

// Fixed column set of the cross-divergence tables (Huber is a training
// loss only, never an evaluation column).
inline constexpr std::array<DivergenceKind, 7> md_columns = {
    DivergenceKind::Ped, DivergenceKind::Pce, DivergenceKind::Pjs, DivergenceKind::Pcs,
    DivergenceKind::Pkl, DivergenceKind::Ced, DivergenceKind::Cjs,
};

// Mean divergence over a test set: (1/n) Σ l(y_i, ŷ_i), pairwise-summed.
double mean_divergence(std::span<const ScoreHistogram> preds,
                       std::span<const ScoreHistogram> truths, DivergenceKind kind);

struct MDReport {
    std::size_t n = 0;
    std::array<double, md_columns.size()> values{};

    double at(DivergenceKind kind) const;
};

MDReport md_report(std::span<const ScoreHistogram> preds,
                   std::span<const ScoreHistogram> truths);

// One training regime: a loss kind plus a reliability mode. Labels follow
// the usual table convention ("CJS", "RS-CJS", ...).
struct Regime {
    DivergenceKind kind = DivergenceKind::Cjs;
    ReliabilityMode mode = ReliabilityMode::None;
    double lambda = 1.0;  // used by Blend only

    std::string label() const;
};

struct MDMatrixRow {
    Regime regime;
    bool ok = false;
    std::string error;
    std::uint64_t seed = 0;
    MDReport report;
    std::vector<ScoreHistogram> predictions;  // on the fixed test set
};

struct MDMatrix {
    std::vector<MDMatrixRow> rows;
};

// Run every test-set feature vector through the model.
std::vector<ScoreHistogram> predict_all(const PredictorParams& params,
                                        std::span<const Sample> samples);

// One independently seeded training run per regime, each row evaluated
// against all seven column divergences on the same test set. A failed
// regime marks its row and leaves the others intact. `jobs` > 1 trains
// regimes concurrently; results are identical either way.
MDMatrix md_matrix(std::span<const Sample> train_set, std::span<const Sample> test_set,
                   std::span<const Regime> regimes, const PredictorConfig& predictor_cfg,
                   const TrainConfig& base_cfg, const ReliabilityConfig& reliability_base,
                   std::size_t jobs = 1);

// Tukey boxplot summary: quartiles by linear interpolation, whiskers at
// the most extreme values within 1.5 IQR of the quartiles, the rest
// listed as outliers.
struct BoxplotSummary {
    std::size_t n = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

BoxplotSummary boxplot_summary(std::vector<double> values);

// Half-open value bin [lo, hi) indexed on a fixed-width grid anchored at 0.
struct BinRange {
    std::int64_t index = 0;
    double lo = 0.0;
    double hi = 0.0;
};

struct MeanStdCell {
    std::int64_t mean_bin = 0;
    std::int64_t std_bin = 0;
    std::size_t count = 0;
};

struct GroupedBox {
    BinRange range;
    BoxplotSummary box;
};

struct MeanMedianGroup {
    BinRange range;  // skewness bin
    BoxplotSummary mean_box;
    BoxplotSummary median_box;
};

// The statistics behind the dataset-subjectiveness figures: a 2D count
// grid over (mean, standard deviation), per-mean-bin boxplots of skewness
// and kurtosis, and per-skewness-bin boxplots of mean and median.
// Degenerate histograms are excluded and counted.
struct SubjectivenessReport {
    double mean_bin_width = 1.0;
    double std_bin_width = 0.25;
    double skew_bin_width = 0.5;
    std::size_t total_input = 0;
    std::size_t degenerate_count = 0;
    std::vector<MeanStdCell> grid;  // sorted by (mean_bin, std_bin)
    std::vector<GroupedBox> skewness_by_mean;
    std::vector<GroupedBox> kurtosis_by_mean;
    std::vector<MeanMedianGroup> mean_median_by_skew;
};

// Throws std::invalid_argument when the input is empty or entirely
// degenerate.
SubjectivenessReport subjectiveness_report(std::span<const ScoreHistogram> hists,
                                           double mean_bin_width = 1.0,
                                           double std_bin_width = 0.25,
                                           double skew_bin_width = 0.5);

}  // namespace scoredist
