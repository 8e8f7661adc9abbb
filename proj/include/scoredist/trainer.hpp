#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scoredist/dataio.hpp"
#include "scoredist/divergence.hpp"
#include "scoredist/predictor.hpp"
#include "scoredist/reliability.hpp"

namespace scoredist {

enum class ReliabilityMode { None, Kurtosis, RatingCount, Blend };

std::string_view to_string(ReliabilityMode mode);
std::optional<ReliabilityMode> reliability_mode_from_string(std::string_view name);

// Mini-batch SGD with momentum, weight decay, and a step learning-rate
// schedule.
struct TrainConfig {
    DivergenceKind loss_kind = DivergenceKind::Cjs;
    ReliabilityMode reliability_mode = ReliabilityMode::None;
    double lambda = 1.0;  // blend factor when reliability_mode == Blend
    std::size_t batch_size = 48;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double base_lr = 0.01;
    double lr_gamma = 0.5;
    std::size_t lr_step_iters = 800;
    std::size_t max_iters = 2000;
    std::uint64_t seed = 0;
    double huber_delta = 1.0;

    void validate() const;
};

struct OptimizerState {
    std::vector<LinearLayer> velocity;  // matches the parameter shapes
    double current_lr = 0.0;
    std::size_t iteration = 0;
};

struct TrainReport {
    PredictorParams params;
    std::vector<double> loss_log;  // one entry per iteration
    std::size_t skipped_samples = 0;  // per-visit: weight 0 or boundary gradient
    std::size_t iterations_run = 0;
    double wall_seconds = 0.0;
    bool diverged = false;
};

// One momentum update: v <- momentum*v - lr*(g + weight_decay*w); w <- w + v.
// The learning rate follows base_lr * gamma^(iteration / lr_step_iters).
// Throws TrainingDivergedError on a non-finite gradient.
void sgd_step(PredictorParams& params, const ParamGradients& grads, OptimizerState& state,
              const TrainConfig& cfg);

// Called once per iteration, after the batch loss/gradient are computed and
// before the parameter update.
struct BatchObservation {
    std::size_t iteration = 0;
    std::span<const std::size_t> sample_indices;
    double loss = 0.0;
    double lr = 0.0;
    const PredictorParams& params;  // pre-update
};
using BatchObserver = std::function<void(const BatchObservation&)>;

// Deterministic for a fixed (dataset, configs, seed): seeded shuffling,
// fixed summation order, single-threaded. When reliability_mode != None the
// relevant thresholds in `reliability` must already be calibrated
// (ThresholdNotCalibratedError otherwise). A diverged run stops early and
// returns its report with `diverged` set.
TrainReport train(std::span<const Sample> dataset, const PredictorConfig& predictor_cfg,
                  const TrainConfig& cfg,
                  const std::optional<ReliabilityConfig>& reliability = std::nullopt,
                  const BatchObserver& observer = nullptr);

// Per-sample reliability weights for the configured mode; weight 1 for
// ReliabilityMode::None and 0 for degenerate targets.
std::vector<double> sample_reliability_weights(std::span<const Sample> dataset,
                                               const TrainConfig& cfg,
                                               const std::optional<ReliabilityConfig>& reliability);

// Resolve the thresholds the configured mode needs from this training set.
ReliabilityConfig calibrate_for_dataset(std::span<const Sample> dataset, ReliabilityMode mode,
                                        ReliabilityConfig base);

}  // namespace scoredist
