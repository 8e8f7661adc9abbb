#include "scoredist/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "scoredist/rng.hpp"

namespace scoredist {

std::string_view to_string(ReliabilityMode mode) {
    switch (mode) {
        case ReliabilityMode::None: return "none";
        case ReliabilityMode::Kurtosis: return "kurtosis";
        case ReliabilityMode::RatingCount: return "count";
        case ReliabilityMode::Blend: return "blend";
    }
    return "?";
}

std::optional<ReliabilityMode> reliability_mode_from_string(std::string_view name) {
    if (name == "none") return ReliabilityMode::None;
    if (name == "kurtosis") return ReliabilityMode::Kurtosis;
    if (name == "count") return ReliabilityMode::RatingCount;
    if (name == "blend") return ReliabilityMode::Blend;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must lie in [0,1)");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
    if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
    if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) {
        throw std::invalid_argument("lr_gamma must lie in (0,1]");
    }
    if (lr_step_iters < 1) throw std::invalid_argument("lr_step_iters must be at least 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0,1]");
    if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_delta must be positive");
}

namespace {

double scheduled_lr(const TrainConfig& cfg, std::size_t iteration) {
    const double steps = static_cast<double>(iteration / cfg.lr_step_iters);
    return cfg.base_lr * std::pow(cfg.lr_gamma, steps);
}

std::vector<LinearLayer> zeros_like(const PredictorParams& params) {
    std::vector<LinearLayer> out(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        out[l].in = params.layers[l].in;
        out[l].out = params.layers[l].out;
        out[l].weights.assign(params.layers[l].weights.size(), 0.0);
        out[l].bias.assign(params.layers[l].bias.size(), 0.0);
    }
    return out;
}

void accumulate(std::vector<LinearLayer>& acc, const ParamGradients& grads, double scale) {
    for (std::size_t l = 0; l < acc.size(); ++l) {
        const LinearLayer& g = grads.layers[l];
        LinearLayer& a = acc[l];
        for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += scale * g.weights[i];
        for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * g.bias[i];
    }
}

void check_finite(const std::vector<LinearLayer>& grads) {
    for (const LinearLayer& layer : grads) {
        for (const double g : layer.weights) {
            if (!std::isfinite(g)) throw TrainingDivergedError();
        }
        for (const double g : layer.bias) {
            if (!std::isfinite(g)) throw TrainingDivergedError();
        }
    }
}

}  // namespace

void sgd_step(PredictorParams& params, const ParamGradients& grads, OptimizerState& state,
              const TrainConfig& cfg) {
    if (grads.layers.size() != params.layers.size()) {
        throw std::invalid_argument("sgd_step: gradient/parameter shape mismatch");
    }
    if (state.velocity.empty()) {
        state.velocity = zeros_like(params);
    }
    check_finite(grads.layers);

    const double lr = scheduled_lr(cfg, state.iteration);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        LinearLayer& layer = params.layers[l];
        const LinearLayer& grad = grads.layers[l];
        LinearLayer& vel = state.velocity[l];
        if (grad.weights.size() != layer.weights.size() ||
            grad.bias.size() != layer.bias.size()) {
            throw std::invalid_argument("sgd_step: gradient/parameter shape mismatch");
        }
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            vel.weights[i] = cfg.momentum * vel.weights[i] -
                             lr * (grad.weights[i] + cfg.weight_decay * layer.weights[i]);
            layer.weights[i] += vel.weights[i];
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            vel.bias[i] = cfg.momentum * vel.bias[i] -
                          lr * (grad.bias[i] + cfg.weight_decay * layer.bias[i]);
            layer.bias[i] += vel.bias[i];
        }
    }
    ++state.iteration;
    state.current_lr = lr;
}

ReliabilityConfig calibrate_for_dataset(std::span<const Sample> dataset, ReliabilityMode mode,
                                        ReliabilityConfig base) {
    base.validate();
    if (mode == ReliabilityMode::Kurtosis || mode == ReliabilityMode::Blend) {
        std::vector<ScoreHistogram> targets;
        targets.reserve(dataset.size());
        for (const Sample& sample : dataset) targets.push_back(sample.target);
        base.kurtosis_threshold =
            calibrate_threshold(targets, base.threshold_percentile, base.epsilon);
    }
    if (mode == ReliabilityMode::RatingCount || mode == ReliabilityMode::Blend) {
        std::vector<std::uint64_t> counts;
        counts.reserve(dataset.size());
        for (const Sample& sample : dataset) counts.push_back(sample.rating_count);
        base.count_threshold = calibrate_count_threshold(counts, base);
    }
    return base;
}

std::vector<double> sample_reliability_weights(
    std::span<const Sample> dataset, const TrainConfig& cfg,
    const std::optional<ReliabilityConfig>& reliability) {
    std::vector<double> weights(dataset.size(), 1.0);
    if (cfg.reliability_mode == ReliabilityMode::None) return weights;
    if (!reliability) throw ThresholdNotCalibratedError();
    const ReliabilityConfig& rel = *reliability;

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Sample& sample = dataset[i];
        switch (cfg.reliability_mode) {
            case ReliabilityMode::Kurtosis:
                weights[i] = kurtosis_reliability(sample.target, rel);
                break;
            case ReliabilityMode::RatingCount:
                weights[i] = rating_count_reliability(sample.rating_count, rel);
                break;
            case ReliabilityMode::Blend: {
                const double r_kurt = kurtosis_reliability(sample.target, rel);
                const double r_cnt = rating_count_reliability(sample.rating_count, rel);
                weights[i] = blended_reliability(r_kurt, r_cnt, cfg.lambda);
                break;
            }
            case ReliabilityMode::None: break;
        }
    }
    return weights;
}

TrainReport train(std::span<const Sample> dataset, const PredictorConfig& predictor_cfg,
                  const TrainConfig& cfg, const std::optional<ReliabilityConfig>& reliability,
                  const BatchObserver& observer) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    predictor_cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("training dataset is empty");
    }
    for (const Sample& sample : dataset) {
        if (sample.features.size() != predictor_cfg.input_dim ||
            sample.target.num_bins() != predictor_cfg.num_bins) {
            throw std::invalid_argument("dataset sample shapes do not match predictor config");
        }
    }

    const std::vector<double> weights = sample_reliability_weights(dataset, cfg, reliability);

    TrainReport report;
    report.params = init_params(predictor_cfg);
    report.loss_log.reserve(cfg.max_iters);

    OptimizerState state;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // triggers the first shuffle

    std::vector<LinearLayer> batch_grad = zeros_like(report.params);
    std::vector<std::size_t> batch_indices(cfg.batch_size);

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        for (auto& layer : batch_grad) {
            std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
            std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        }
        double batch_loss = 0.0;
        std::size_t effective = 0;

        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            batch_indices[b] = idx;

            const double w = weights[idx];
            if (w == 0.0) {
                ++report.skipped_samples;
                continue;
            }
            const Sample& sample = dataset[idx];
            const ForwardTrace trace = forward(report.params, sample.features);
            std::vector<double> loss_grad;
            try {
                loss_grad = divergence_gradient(cfg.loss_kind, sample.target.probs(),
                                                trace.prediction, cfg.huber_delta);
            } catch (const GradientBoundaryError&) {
                // One pathological sample must not abort the run.
                ++report.skipped_samples;
                continue;
            }
            const double loss = divergence(cfg.loss_kind, sample.target.probs(),
                                           trace.prediction, cfg.huber_delta);
            batch_loss += w * loss;
            if (w != 1.0) {
                for (double& g : loss_grad) g *= w;
            }
            const ParamGradients grads = backward(report.params, trace, loss_grad);
            accumulate(batch_grad, grads, 1.0);
            ++effective;
        }

        const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
        batch_loss *= inv_batch;
        if (!std::isfinite(batch_loss)) {
            // Keeps the logged losses finite; the gradient is certainly
            // non-finite too, so this is the same divergence event.
            report.diverged = true;
            ++report.iterations_run;
            break;
        }
        report.loss_log.push_back(batch_loss);

        if (observer) {
            observer(BatchObservation{iter, batch_indices, batch_loss,
                                      scheduled_lr(cfg, state.iteration), report.params});
        }

        if (effective == 0) {
            // Nothing contributed; advance the schedule without touching
            // the parameters (weight decay must not act on an empty batch).
            state.current_lr = scheduled_lr(cfg, state.iteration);
            ++state.iteration;
            ++report.iterations_run;
            continue;
        }

        ParamGradients mean_grad;
        mean_grad.layers = std::move(batch_grad);
        for (auto& layer : mean_grad.layers) {
            for (double& g : layer.weights) g *= inv_batch;
            for (double& g : layer.bias) g *= inv_batch;
        }
        try {
            sgd_step(report.params, mean_grad, state, cfg);
        } catch (const TrainingDivergedError&) {
            report.diverged = true;
            batch_grad = std::move(mean_grad.layers);
            ++report.iterations_run;
            break;
        }
        batch_grad = std::move(mean_grad.layers);
        ++report.iterations_run;
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace scoredist
