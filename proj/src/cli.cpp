#include "scoredist/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scoredist/dataio.hpp"
#include "scoredist/evaluation.hpp"
#include "scoredist/numeric.hpp"
#include "scoredist/rng.hpp"
#include "scoredist/trainer.hpp"

namespace scoredist::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw DataFormatError("cannot write file: " + path);
    }
    out << content;
}

std::string hex64(std::uint64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

DivergenceKind parse_kind(const std::string& name) {
    const auto kind = divergence_kind_from_string(name);
    if (!kind) {
        throw CLI::ValidationError("--loss", "unknown divergence kind: " + name);
    }
    return *kind;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
    std::string out_dir;
    std::string spec_file;
    SyntheticSpec spec{/*n_samples=*/2000};
    double corrupt_fraction = 0.0;
    std::uint64_t corrupt_seed = 0;
};

// File values fill in whatever was not given explicitly on the command
// line; explicit flags win.
void apply_spec_file(GenOptions& opt, const CLI::App& cmd) {
    std::ifstream in(opt.spec_file);
    if (!in) {
        throw DataFormatError("cannot open spec file: " + opt.spec_file);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& error) {
        throw DataFormatError("bad spec file: " + std::string(error.what()));
    }
    const auto take = [&](const char* flag, const char* key, auto& field) {
        if (cmd.count(flag) == 0 && doc.contains(key)) {
            field = doc[key].get<std::decay_t<decltype(field)>>();
        }
    };
    take("--n", "n_samples", opt.spec.n_samples);
    take("--feature-dim", "feature_dim", opt.spec.feature_dim);
    take("--fraction-skewed", "fraction_skewed", opt.spec.fraction_skewed);
    take("--count-min", "rating_count_min", opt.spec.rating_count_min);
    take("--count-max", "rating_count_max", opt.spec.rating_count_max);
    take("--label-noise", "label_noise", opt.spec.label_noise);
    take("--seed", "seed", opt.spec.seed);
    take("--corrupt-fraction", "corrupt_fraction", opt.corrupt_fraction);
    take("--corrupt-seed", "corrupt_seed", opt.corrupt_seed);
}

int run_gen(GenOptions opt, const CLI::App& cmd) {
    if (!opt.spec_file.empty()) {
        apply_spec_file(opt, cmd);
    }
    opt.spec.validate();
    std::cout << "config: gen n_samples=" << opt.spec.n_samples
              << " feature_dim=" << opt.spec.feature_dim
              << " fraction_skewed=" << opt.spec.fraction_skewed << " rating_count=["
              << opt.spec.rating_count_min << "," << opt.spec.rating_count_max << "]"
              << " label_noise=" << opt.spec.label_noise << " seed=" << opt.spec.seed
              << " corrupt_fraction=" << opt.corrupt_fraction << " out=" << opt.out_dir
              << "\n";

    SyntheticDataset dataset = generate_synthetic(opt.spec);
    std::size_t corrupted = 0;
    if (opt.corrupt_fraction > 0.0) {
        corrupted = corrupt_to_heavy_tailed(dataset.train, opt.corrupt_fraction,
                                            opt.corrupt_seed == 0 ? opt.spec.seed + 1
                                                                  : opt.corrupt_seed);
    }

    fs::create_directories(opt.out_dir);
    const std::string train_path = (fs::path(opt.out_dir) / "train.txt").string();
    const std::string test_path = (fs::path(opt.out_dir) / "test.txt").string();
    save_samples(train_path, dataset.train);
    save_samples(test_path, dataset.test);

    json manifest = {
        {"command", "gen"},
        {"n_samples", opt.spec.n_samples},
        {"feature_dim", opt.spec.feature_dim},
        {"fraction_skewed", opt.spec.fraction_skewed},
        {"rating_count_min", opt.spec.rating_count_min},
        {"rating_count_max", opt.spec.rating_count_max},
        {"label_noise", opt.spec.label_noise},
        {"seed", opt.spec.seed},
        {"corrupt_fraction", opt.corrupt_fraction},
        {"corrupted_samples", corrupted},
        {"train_count", dataset.train.size()},
        {"test_count", dataset.test.size()},
        {"train_digest", hex64(dataset_digest(dataset.train))},
        {"test_digest", hex64(dataset_digest(dataset.test))},
    };
    write_text_file((fs::path(opt.out_dir) / "gen_manifest.json").string(),
                    manifest.dump(2) + "\n");

    std::cout << "wrote " << dataset.train.size() << " train / " << dataset.test.size()
              << " test samples";
    if (corrupted > 0) std::cout << " (" << corrupted << " train targets corrupted)";
    std::cout << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    std::string data_file;
    std::string out_dir;
    std::string format = "auto";
    double mean_bin_width = 1.0;
    double std_bin_width = 0.25;
    double skew_bin_width = 0.5;
    bool strict = false;
};

std::string sniff_format(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataFormatError("cannot open data file: " + path);
    }
    std::string first;
    std::getline(in, first);
    return first.rfind("# scoredist-samples", 0) == 0 ? "samples" : "ava";
}

std::string box_stats(const BoxplotSummary& box) {
    std::ostringstream row;
    row << box.n << '\t' << format_double(box.min) << '\t' << format_double(box.q1) << '\t'
        << format_double(box.median) << '\t' << format_double(box.q3) << '\t'
        << format_double(box.max) << '\t' << format_double(box.whisker_low) << '\t'
        << format_double(box.whisker_high) << '\t';
    for (std::size_t i = 0; i < box.outliers.size(); ++i) {
        if (i > 0) row << ',';
        row << format_double(box.outliers[i]);
    }
    return row.str();
}

std::string box_row(const BinRange& range, const BoxplotSummary& box) {
    return format_double(range.lo) + "\t" + format_double(range.hi) + "\t" + box_stats(box);
}

constexpr const char* kBoxHeader =
    "lo\thi\tn\tmin\tq1\tmedian\tq3\tmax\twhisker_low\twhisker_high\toutliers";

int run_analyze(const AnalyzeOptions& opt) {
    std::string format = opt.format;
    if (format == "auto") format = sniff_format(opt.data_file);
    std::cout << "config: analyze data=" << opt.data_file << " format=" << format
              << " mean_bin_width=" << opt.mean_bin_width
              << " std_bin_width=" << opt.std_bin_width
              << " skew_bin_width=" << opt.skew_bin_width << " out=" << opt.out_dir << "\n";

    std::vector<ScoreHistogram> hists;
    std::size_t unusable = 0;
    if (format == "samples") {
        const std::vector<Sample> samples = load_samples(opt.data_file);
        hists.reserve(samples.size());
        for (const Sample& sample : samples) hists.push_back(sample.target);
    } else if (format == "ava") {
        const AvaParseResult parsed = parse_ava_metadata_file(opt.data_file, opt.strict);
        for (const auto& error : parsed.errors) {
            std::cerr << "malformed line " << error.line << ": " << error.message << "\n";
        }
        unusable = parsed.errors.size();
        hists.reserve(parsed.records.size());
        for (const AvaRecord& record : parsed.records) {
            if (record.total_ratings() == 0) {
                ++unusable;
                continue;
            }
            std::vector<std::uint64_t> counts(record.rating_counts.begin(),
                                              record.rating_counts.end());
            hists.push_back(histogram_from_ratings(RatingSet(default_scale(), std::move(counts))));
        }
    } else {
        throw CLI::ValidationError("--format", "unknown format: " + format);
    }

    const SubjectivenessReport report = subjectiveness_report(
        hists, opt.mean_bin_width, opt.std_bin_width, opt.skew_bin_width);

    fs::create_directories(opt.out_dir);
    {
        std::ostringstream out;
        out << "mean_lo\tmean_hi\tstd_lo\tstd_hi\tcount\n";
        for (const MeanStdCell& cell : report.grid) {
            const BinRange mr = {cell.mean_bin, cell.mean_bin * report.mean_bin_width,
                                 (cell.mean_bin + 1) * report.mean_bin_width};
            const BinRange sr = {cell.std_bin, cell.std_bin * report.std_bin_width,
                                 (cell.std_bin + 1) * report.std_bin_width};
            out << format_double(mr.lo) << '\t' << format_double(mr.hi) << '\t'
                << format_double(sr.lo) << '\t' << format_double(sr.hi) << '\t' << cell.count
                << '\n';
        }
        write_text_file((fs::path(opt.out_dir) / "fig2_grid.tsv").string(), out.str());
    }
    {
        std::ostringstream out;
        out << "mean_" << kBoxHeader << "\n";
        for (const GroupedBox& group : report.skewness_by_mean) {
            out << box_row(group.range, group.box) << '\n';
        }
        write_text_file((fs::path(opt.out_dir) / "fig3_skew_by_mean.tsv").string(), out.str());
    }
    {
        std::ostringstream out;
        out << "mean_" << kBoxHeader << "\n";
        for (const GroupedBox& group : report.kurtosis_by_mean) {
            out << box_row(group.range, group.box) << '\n';
        }
        write_text_file((fs::path(opt.out_dir) / "fig3_kurt_by_mean.tsv").string(), out.str());
    }
    {
        std::ostringstream out;
        out << "skew_lo\tskew_hi\tstat\tn\tmin\tq1\tmedian\tq3\tmax\twhisker_low\twhisker_"
               "high\toutliers\n";
        for (const MeanMedianGroup& group : report.mean_median_by_skew) {
            out << format_double(group.range.lo) << '\t' << format_double(group.range.hi)
                << "\tmean\t" << box_stats(group.mean_box) << '\n';
            out << format_double(group.range.lo) << '\t' << format_double(group.range.hi)
                << "\tmedian\t" << box_stats(group.median_box) << '\n';
        }
        write_text_file((fs::path(opt.out_dir) / "fig4_mean_median_by_skew.tsv").string(),
                        out.str());
    }
    {
        std::ostringstream out;
        out << "total\tdegenerate\tused\tunusable_records\n";
        out << report.total_input << '\t' << report.degenerate_count << '\t'
            << (report.total_input - report.degenerate_count) << '\t' << unusable << '\n';
        write_text_file((fs::path(opt.out_dir) / "summary.tsv").string(), out.str());
    }

    std::cout << "analyzed " << report.total_input << " histograms ("
              << report.degenerate_count << " degenerate excluded); tables written to "
              << opt.out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckOptions {
    std::vector<std::string> kinds;
    std::size_t trials = 100;
    std::uint64_t seed = 7;
};

std::vector<double> random_interior_histogram(Rng& rng, std::size_t z) {
    std::vector<double> probs(z);
    double sum = 0.0;
    for (double& p : probs) {
        // Floor keeps every bin well away from the boundary so the central
        // difference at h = 1e-5 stays in the truncation-dominated regime.
        p = 0.1 + rng.uniform();
        sum += p;
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central finite differences of the loss in each predicted coordinate.
double worst_divergence_gradient_error(DivergenceKind kind, std::size_t trials,
                                       std::uint64_t seed) {
    Rng rng(seed);
    constexpr double h = 1e-5;
    constexpr std::size_t z = 10;
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::vector<double> y = random_interior_histogram(rng, z);
        std::vector<double> q = random_interior_histogram(rng, z);
        const std::vector<double> analytic = divergence_gradient(kind, y, q);
        for (std::size_t i = 0; i < z; ++i) {
            const double saved = q[i];
            q[i] = saved + h;
            const double up = divergence(kind, y, q);
            q[i] = saved - h;
            const double down = divergence(kind, y, q);
            q[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, relative_error(analytic[i], numeric));
        }
    }
    return worst;
}

// End-to-end: loss(params) = divergence(kind, y, forward(params, x).ŷ).
double worst_end_to_end_gradient_error(DivergenceKind kind, std::size_t trials,
                                       std::uint64_t seed) {
    Rng rng(seed);
    constexpr double h = 1e-5;
    PredictorConfig config;
    config.input_dim = 8;
    config.hidden_dims = {16};
    config.num_bins = 10;

    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        config.seed = rng.next_u64();
        PredictorParams params = init_params(config);
        std::vector<double> features(config.input_dim);
        for (double& f : features) f = rng.uniform(-1.5, 1.5);
        const std::vector<double> y = random_interior_histogram(rng, config.num_bins);

        const ForwardTrace trace = forward(params, features);
        const std::vector<double> loss_grad = divergence_gradient(kind, y, trace.prediction);
        const ParamGradients analytic = backward(params, trace, loss_grad);

        const auto loss_at = [&]() {
            return divergence(kind, y, forward(params, features).prediction);
        };
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            LinearLayer& layer = params.layers[l];
            for (std::size_t i = 0; i < layer.weights.size() + layer.bias.size(); ++i) {
                double& w = i < layer.weights.size() ? layer.weights[i]
                                                     : layer.bias[i - layer.weights.size()];
                const double a = i < layer.weights.size()
                                     ? analytic.layers[l].weights[i]
                                     : analytic.layers[l].bias[i - layer.weights.size()];
                const double saved = w;
                w = saved + h;
                const double up = loss_at();
                w = saved - h;
                const double down = loss_at();
                w = saved;
                worst = std::max(worst, relative_error(a, (up - down) / (2.0 * h)));
            }
        }
    }
    return worst;
}

int run_gradcheck(const GradcheckOptions& opt) {
    std::vector<DivergenceKind> kinds;
    if (opt.kinds.empty()) {
        kinds.assign(all_divergence_kinds.begin(), all_divergence_kinds.end());
    } else {
        for (const std::string& name : opt.kinds) kinds.push_back(parse_kind(name));
    }
    std::cout << "config: gradcheck trials=" << opt.trials << " seed=" << opt.seed
              << " kinds=";
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        std::cout << (i ? "," : "") << to_string(kinds[i]);
    }
    std::cout << "\n";

    constexpr double kDivergenceTolerance = 1e-6;
    constexpr double kEndToEndTolerance = 1e-5;
    // Far fewer end-to-end trials: every trial sweeps all parameters.
    const std::size_t e2e_trials = std::max<std::size_t>(1, opt.trials / 10);

    bool ok = true;
    for (const DivergenceKind kind : kinds) {
        const double worst = worst_divergence_gradient_error(kind, opt.trials, opt.seed);
        const bool pass = worst < kDivergenceTolerance;
        ok = ok && pass;
        std::cout << (pass ? "ok  " : "FAIL") << " divergence " << to_string(kind)
                  << " worst_rel_err=" << worst << "\n";
    }
    for (const DivergenceKind kind : kinds) {
        const double worst = worst_end_to_end_gradient_error(kind, e2e_trials, opt.seed + 1);
        const bool pass = worst < kEndToEndTolerance;
        ok = ok && pass;
        std::cout << (pass ? "ok  " : "FAIL") << " end-to-end " << to_string(kind)
                  << " worst_rel_err=" << worst << "\n";
    }
    return ok ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// train / eval / matrix
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string data_dir;
    std::string out_dir;
    std::string loss = "cjs";
    std::string rs = "none";
    TrainConfig trainer;
    ReliabilityConfig reliability;
    std::vector<std::size_t> hidden_dims{64};
};

PredictorConfig predictor_config_for(std::span<const Sample> samples,
                                     const std::vector<std::size_t>& hidden_dims,
                                     std::uint64_t seed) {
    if (samples.empty()) {
        throw DataFormatError("dataset is empty");
    }
    PredictorConfig config;
    config.input_dim = samples[0].features.size();
    config.hidden_dims = hidden_dims;
    config.num_bins = samples[0].target.num_bins();
    config.seed = seed;
    for (const Sample& sample : samples) {
        if (sample.features.size() != config.input_dim ||
            sample.target.num_bins() != config.num_bins) {
            throw DataFormatError("dataset has inconsistent feature or bin dimensions");
        }
    }
    return config;
}

json reliability_json(const ReliabilityConfig& rel, const TrainConfig& cfg) {
    json out = {
        {"mode", std::string(to_string(cfg.reliability_mode))},
        {"epsilon", rel.epsilon},
        {"reference_count", rel.reference_count},
        {"threshold_percentile", rel.threshold_percentile},
    };
    if (cfg.reliability_mode == ReliabilityMode::Blend) out["lambda"] = cfg.lambda;
    if (rel.kurtosis_threshold) out["kurtosis_threshold"] = *rel.kurtosis_threshold;
    if (rel.count_threshold) out["count_threshold"] = *rel.count_threshold;
    return out;
}

std::string md_report_table(const MDReport& report) {
    std::ostringstream out;
    out << "kind\tmd\n";
    for (std::size_t i = 0; i < md_columns.size(); ++i) {
        out << to_string(md_columns[i]) << '\t' << format_double(report.values[i]) << '\n';
    }
    return out.str();
}

int run_train(TrainOptions opt) {
    opt.trainer.loss_kind = parse_kind(opt.loss);
    const auto mode = reliability_mode_from_string(opt.rs);
    if (!mode) {
        throw CLI::ValidationError("--rs", "unknown reliability mode: " + opt.rs);
    }
    opt.trainer.reliability_mode = *mode;
    opt.trainer.validate();
    opt.reliability.lambda = opt.trainer.lambda;

    const std::string train_path = (fs::path(opt.data_dir) / "train.txt").string();
    const std::vector<Sample> train_set = load_samples(train_path);
    const PredictorConfig predictor_cfg =
        predictor_config_for(train_set, opt.hidden_dims, opt.trainer.seed);

    std::cout << "config: train data=" << opt.data_dir << " n=" << train_set.size()
              << " loss=" << opt.loss << " rs=" << opt.rs << " lambda=" << opt.trainer.lambda
              << " th_percentile=" << opt.reliability.threshold_percentile
              << " batch_size=" << opt.trainer.batch_size << " momentum=" << opt.trainer.momentum
              << " weight_decay=" << opt.trainer.weight_decay << " lr=" << opt.trainer.base_lr
              << " lr_gamma=" << opt.trainer.lr_gamma << " lr_step=" << opt.trainer.lr_step_iters
              << " iters=" << opt.trainer.max_iters << " seed=" << opt.trainer.seed
              << " hidden=";
    for (std::size_t i = 0; i < opt.hidden_dims.size(); ++i) {
        std::cout << (i ? "," : "") << opt.hidden_dims[i];
    }
    std::cout << "\n";

    std::optional<ReliabilityConfig> reliability;
    if (opt.trainer.reliability_mode != ReliabilityMode::None) {
        reliability = calibrate_for_dataset(train_set, opt.trainer.reliability_mode,
                                            opt.reliability);
        if (reliability->kurtosis_threshold) {
            std::cout << "calibrated kurtosis threshold: " << *reliability->kurtosis_threshold
                      << "\n";
        }
        if (reliability->count_threshold) {
            std::cout << "calibrated count threshold: " << *reliability->count_threshold << "\n";
        }
    }

    const TrainReport report = train(train_set, predictor_cfg, opt.trainer, reliability);

    fs::create_directories(opt.out_dir);
    const std::string checkpoint_path = (fs::path(opt.out_dir) / "checkpoint.txt").string();
    save_checkpoint(checkpoint_path, report.params);
    {
        std::ostringstream out;
        out << "iter\tloss\n";
        for (std::size_t i = 0; i < report.loss_log.size(); ++i) {
            out << i << '\t' << format_double(report.loss_log[i]) << '\n';
        }
        write_text_file((fs::path(opt.out_dir) / "loss_log.tsv").string(), out.str());
    }

    json manifest = {
        {"command", "train"},
        {"data", opt.data_dir},
        {"train_count", train_set.size()},
        {"train_digest", hex64(dataset_digest(train_set))},
        {"loss", std::string(to_string(opt.trainer.loss_kind))},
        {"reliability", reliability_json(reliability.value_or(opt.reliability), opt.trainer)},
        {"batch_size", opt.trainer.batch_size},
        {"momentum", opt.trainer.momentum},
        {"weight_decay", opt.trainer.weight_decay},
        {"base_lr", opt.trainer.base_lr},
        {"lr_gamma", opt.trainer.lr_gamma},
        {"lr_step_iters", opt.trainer.lr_step_iters},
        {"max_iters", opt.trainer.max_iters},
        {"huber_delta", opt.trainer.huber_delta},
        {"seed", opt.trainer.seed},
        {"hidden_dims", opt.hidden_dims},
        {"input_dim", predictor_cfg.input_dim},
        {"num_bins", predictor_cfg.num_bins},
        {"iterations_run", report.iterations_run},
        {"skipped_samples", report.skipped_samples},
        {"diverged", report.diverged},
        {"wall_seconds", report.wall_seconds},
    };
    if (!report.loss_log.empty()) {
        const std::size_t tail = std::min<std::size_t>(50, report.loss_log.size());
        double acc = 0.0;
        for (std::size_t i = report.loss_log.size() - tail; i < report.loss_log.size(); ++i) {
            acc += report.loss_log[i];
        }
        manifest["final_train_loss_tail_mean"] = acc / static_cast<double>(tail);
    }

    const std::string test_path = (fs::path(opt.data_dir) / "test.txt").string();
    if (fs::exists(test_path)) {
        const std::vector<Sample> test_set = load_samples(test_path);
        const std::vector<ScoreHistogram> preds = predict_all(report.params, test_set);
        std::vector<ScoreHistogram> truths;
        truths.reserve(test_set.size());
        for (const Sample& sample : test_set) truths.push_back(sample.target);
        const MDReport md = md_report(preds, truths);
        json metrics;
        for (std::size_t i = 0; i < md_columns.size(); ++i) {
            metrics[std::string(to_string(md_columns[i]))] = md.values[i];
        }
        manifest["test_md"] = metrics;
        std::cout << "test MD:\n" << md_report_table(md);
    }
    write_text_file((fs::path(opt.out_dir) / "manifest.json").string(),
                    manifest.dump(2) + "\n");

    std::cout << "trained " << report.iterations_run << " iterations in " << report.wall_seconds
              << "s, skipped " << report.skipped_samples << " sample visits; checkpoint at "
              << checkpoint_path << "\n";
    if (report.diverged) {
        std::cerr << "training diverged\n";
        return kExitNumerical;
    }
    return kExitOk;
}

struct EvalOptions {
    std::string checkpoint;
    std::string data_dir;
    std::string out_dir;
    bool echo_truth = false;
};

int run_eval(const EvalOptions& opt) {
    const std::string test_path = (fs::path(opt.data_dir) / "test.txt").string();
    const std::vector<Sample> test_set = load_samples(test_path);
    if (test_set.empty()) {
        throw DataFormatError("test set is empty: " + test_path);
    }
    std::cout << "config: eval data=" << opt.data_dir << " n=" << test_set.size()
              << " checkpoint=" << (opt.echo_truth ? "(echo-truth)" : opt.checkpoint) << "\n";

    std::vector<ScoreHistogram> truths;
    truths.reserve(test_set.size());
    for (const Sample& sample : test_set) truths.push_back(sample.target);

    std::vector<ScoreHistogram> preds;
    if (opt.echo_truth) {
        preds = truths;
    } else {
        const PredictorParams params = load_checkpoint(opt.checkpoint);
        if (!test_set.empty() &&
            (params.config.input_dim != test_set[0].features.size() ||
             params.config.num_bins != test_set[0].target.num_bins())) {
            throw CheckpointError("checkpoint shapes do not match the dataset");
        }
        preds = predict_all(params, test_set);
    }

    const MDReport report = md_report(preds, truths);
    const std::string table = md_report_table(report);
    std::cout << table;
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_text_file((fs::path(opt.out_dir) / "md_report.tsv").string(), table);
    }
    return kExitOk;
}

struct MatrixOptions {
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> regime_specs;
    std::size_t jobs = 1;
    TrainOptions train_opt;  // shared hyperparameters
};

std::vector<Regime> parse_regimes(const std::vector<std::string>& specs) {
    std::vector<Regime> regimes;
    for (const std::string& chunk : specs) {
        std::istringstream items(chunk);
        std::string item;
        while (std::getline(items, item, ';')) {
            if (item.empty()) continue;
            if (item == "all") {
                for (const DivergenceKind kind : all_divergence_kinds) {
                    regimes.push_back(Regime{kind, ReliabilityMode::None, 1.0});
                    regimes.push_back(Regime{kind, ReliabilityMode::Kurtosis, 1.0});
                }
                continue;
            }
            std::vector<std::string> parts;
            std::istringstream fields(item);
            std::string part;
            while (std::getline(fields, part, ':')) parts.push_back(part);

            std::string kind_name = parts[0];
            ReliabilityMode mode = ReliabilityMode::None;
            if (kind_name.rfind("rs-", 0) == 0) {
                kind_name = kind_name.substr(3);
                mode = ReliabilityMode::Kurtosis;
            }
            const auto kind = divergence_kind_from_string(kind_name);
            if (!kind) {
                throw CLI::ValidationError("--regimes", "unknown divergence kind: " + kind_name);
            }
            if (parts.size() == 1) {
                regimes.push_back(Regime{*kind, mode, 1.0});
                continue;
            }
            const auto parsed_mode = reliability_mode_from_string(parts[1]);
            if (!parsed_mode) {
                throw CLI::ValidationError("--regimes",
                                           "unknown reliability mode: " + parts[1]);
            }
            if (*parsed_mode == ReliabilityMode::Blend) {
                if (parts.size() != 3) {
                    throw CLI::ValidationError("--regimes",
                                               "blend regimes need a lambda list: " + item);
                }
                std::istringstream lambdas(parts[2]);
                std::string token;
                while (std::getline(lambdas, token, ',')) {
                    regimes.push_back(Regime{*kind, ReliabilityMode::Blend, std::stod(token)});
                }
            } else {
                if (parts.size() != 2) {
                    throw CLI::ValidationError("--regimes", "malformed regime: " + item);
                }
                regimes.push_back(Regime{*kind, *parsed_mode, 1.0});
            }
        }
    }
    if (regimes.empty()) {
        throw CLI::ValidationError("--regimes", "no regimes given");
    }
    return regimes;
}

std::string matrix_table(const MDMatrix& matrix) {
    std::ostringstream out;
    out << "regime";
    for (const DivergenceKind kind : md_columns) {
        std::string name(to_string(kind));
        for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        out << '\t' << name;
    }
    out << "\tstatus\n";
    for (const MDMatrixRow& row : matrix.rows) {
        out << row.regime.label();
        if (row.ok) {
            for (const double v : row.report.values) out << '\t' << format_double(v);
            out << "\tok\n";
        } else {
            for (std::size_t i = 0; i < md_columns.size(); ++i) out << "\tnan";
            out << "\tfailed: " << row.error << '\n';
        }
    }
    return out.str();
}

int run_matrix(MatrixOptions opt) {
    const std::vector<Regime> regimes = parse_regimes(opt.regime_specs);
    opt.train_opt.trainer.validate();

    const std::vector<Sample> train_set =
        load_samples((fs::path(opt.data_dir) / "train.txt").string());
    const std::vector<Sample> test_set =
        load_samples((fs::path(opt.data_dir) / "test.txt").string());
    if (test_set.empty()) {
        throw DataFormatError("test set is empty: " + opt.data_dir);
    }
    const PredictorConfig predictor_cfg = predictor_config_for(
        train_set, opt.train_opt.hidden_dims, opt.train_opt.trainer.seed);

    std::cout << "config: matrix data=" << opt.data_dir << " regimes=" << regimes.size()
              << " jobs=" << opt.jobs << " iters=" << opt.train_opt.trainer.max_iters
              << " seed=" << opt.train_opt.trainer.seed << "\n";
    for (const Regime& regime : regimes) std::cout << "  regime " << regime.label() << "\n";

    const MDMatrix matrix = md_matrix(train_set, test_set, regimes, predictor_cfg,
                                      opt.train_opt.trainer, opt.train_opt.reliability,
                                      opt.jobs);

    const std::string table = matrix_table(matrix);
    std::cout << table;
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_text_file((fs::path(opt.out_dir) / "matrix.tsv").string(), table);
    }
    for (const MDMatrixRow& row : matrix.rows) {
        if (!row.ok) return kExitNumerical;
    }
    return kExitOk;
}

void add_train_flags(CLI::App* cmd, TrainOptions& opt) {
    cmd->add_option("--loss", opt.loss, "training loss kind")->capture_default_str();
    cmd->add_option("--rs", opt.rs, "reliability mode: none|kurtosis|count|blend")
        ->capture_default_str();
    cmd->add_option("--lambda", opt.trainer.lambda, "blend factor (1 = pure kurtosis)")
        ->capture_default_str();
    cmd->add_option("--th-percentile", opt.reliability.threshold_percentile,
                    "reliability threshold percentile")
        ->capture_default_str();
    cmd->add_option("--epsilon", opt.reliability.epsilon, "reliability epsilon")
        ->capture_default_str();
    cmd->add_option("--ref-count", opt.reliability.reference_count,
                    "reference rating count L-bar")
        ->capture_default_str();
    cmd->add_option("--batch-size", opt.trainer.batch_size)->capture_default_str();
    cmd->add_option("--momentum", opt.trainer.momentum)->capture_default_str();
    cmd->add_option("--weight-decay", opt.trainer.weight_decay)->capture_default_str();
    cmd->add_option("--lr", opt.trainer.base_lr, "base learning rate")->capture_default_str();
    cmd->add_option("--lr-gamma", opt.trainer.lr_gamma)->capture_default_str();
    cmd->add_option("--lr-step", opt.trainer.lr_step_iters, "iterations per lr step")
        ->capture_default_str();
    cmd->add_option("--iters", opt.trainer.max_iters, "training iterations")
        ->capture_default_str();
    cmd->add_option("--seed", opt.trainer.seed)->capture_default_str();
    cmd->add_option("--hidden", opt.hidden_dims, "hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--huber-delta", opt.trainer.huber_delta)->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"score-distribution divergence losses, training, and analysis"};
    app.require_subcommand(1);

    GenOptions gen_opt;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic benchmark dataset");
    gen->add_option("--out", gen_opt.out_dir, "output directory")->required();
    gen->add_option("--spec", gen_opt.spec_file, "JSON spec file (flags override it)");
    gen->add_option("--n", gen_opt.spec.n_samples, "sample count")->capture_default_str();
    gen->add_option("--feature-dim", gen_opt.spec.feature_dim)->capture_default_str();
    gen->add_option("--fraction-skewed", gen_opt.spec.fraction_skewed)->capture_default_str();
    gen->add_option("--count-min", gen_opt.spec.rating_count_min)->capture_default_str();
    gen->add_option("--count-max", gen_opt.spec.rating_count_max)->capture_default_str();
    gen->add_option("--label-noise", gen_opt.spec.label_noise)->capture_default_str();
    gen->add_option("--seed", gen_opt.spec.seed)->capture_default_str();
    gen->add_option("--corrupt-fraction", gen_opt.corrupt_fraction,
                    "fraction of train targets replaced by heavy-tailed histograms")
        ->capture_default_str();
    gen->add_option("--corrupt-seed", gen_opt.corrupt_seed, "0 = derive from --seed")
        ->capture_default_str();

    AnalyzeOptions analyze_opt;
    CLI::App* analyze =
        app.add_subcommand("analyze", "subjectiveness statistics of a rating dataset");
    analyze->add_option("--data", analyze_opt.data_file, "samples file or AVA metadata file")
        ->required();
    analyze->add_option("--out", analyze_opt.out_dir, "output directory")->required();
    analyze->add_option("--format", analyze_opt.format, "auto|samples|ava")
        ->capture_default_str();
    analyze->add_option("--mean-bin-width", analyze_opt.mean_bin_width)->capture_default_str();
    analyze->add_option("--std-bin-width", analyze_opt.std_bin_width)->capture_default_str();
    analyze->add_option("--skew-bin-width", analyze_opt.skew_bin_width)->capture_default_str();
    analyze->add_flag("--strict", analyze_opt.strict, "abort on the first malformed line");

    GradcheckOptions grad_opt;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
    gradcheck->add_option("--kinds", grad_opt.kinds, "divergence kinds (default: all)")
        ->delimiter(',');
    gradcheck->add_option("--trials", grad_opt.trials)->capture_default_str();
    gradcheck->add_option("--seed", grad_opt.seed)->capture_default_str();

    TrainOptions train_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "train a histogram predictor");
    train_cmd->add_option("--data", train_opt.data_dir, "dataset directory (train.txt[, test.txt])")
        ->required();
    train_cmd->add_option("--out", train_opt.out_dir, "output directory")->required();
    add_train_flags(train_cmd, train_opt);

    EvalOptions eval_opt;
    CLI::App* eval_cmd = app.add_subcommand("eval", "mean divergences of a checkpoint");
    eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint file");
    eval_cmd->add_option("--data", eval_opt.data_dir, "dataset directory (test.txt)")
        ->required();
    eval_cmd->add_option("--out", eval_opt.out_dir, "optional output directory");
    eval_cmd->add_flag("--echo-truth", eval_opt.echo_truth,
                       "evaluate the ground truth against itself (oracle bypass)");

    MatrixOptions matrix_opt;
    CLI::App* matrix_cmd =
        app.add_subcommand("matrix", "cross-divergence table over training regimes");
    matrix_cmd->add_option("--data", matrix_opt.data_dir, "dataset directory")->required();
    matrix_cmd->add_option("--out", matrix_opt.out_dir, "optional output directory");
    matrix_cmd
        ->add_option("--regimes", matrix_opt.regime_specs,
                     "e.g. \"cjs;rs-cjs\" or \"cjs:blend:0,0.5,1.0\" or \"all\"")
        ->required();
    matrix_cmd->add_option("--jobs", matrix_opt.jobs, "concurrent regime runs")
        ->capture_default_str();
    add_train_flags(matrix_cmd, matrix_opt.train_opt);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("scoredist");
    for (const std::string& arg : args) argv.push_back(arg.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& error) {
        app.exit(error);
        return kExitUsage;
    }

    try {
        if (*gen) return run_gen(gen_opt, *gen);
        if (*analyze) return run_analyze(analyze_opt);
        if (*gradcheck) return run_gradcheck(grad_opt);
        if (*train_cmd) return run_train(train_opt);
        if (*eval_cmd) {
            if (!eval_opt.echo_truth && eval_opt.checkpoint.empty()) {
                std::cerr << "eval needs --checkpoint (or --echo-truth)\n";
                return kExitUsage;
            }
            return run_eval(eval_opt);
        }
        if (*matrix_cmd) return run_matrix(matrix_opt);
    } catch (const CLI::ParseError& error) {
        std::cerr << error.what() << "\n";
        return kExitUsage;
    } catch (const TrainingDivergedError& error) {
        std::cerr << "numerical failure: " << error.what() << "\n";
        return kExitNumerical;
    } catch (const GradientBoundaryError& error) {
        std::cerr << "numerical failure: " << error.what() << "\n";
        return kExitNumerical;
    } catch (const DegenerateDistributionError& error) {
        std::cerr << "numerical failure: " << error.what() << "\n";
        return kExitNumerical;
    } catch (const DataFormatError& error) {
        std::cerr << "data error: " << error.what() << "\n";
        return kExitData;
    } catch (const CheckpointError& error) {
        std::cerr << "data error: " << error.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& error) {
        std::cerr << "usage error: " << error.what() << "\n";
        return kExitUsage;
    } catch (const std::logic_error& error) {
        std::cerr << "usage error: " << error.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& error) {
        std::cerr << "data error: " << error.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace scoredist::cli
