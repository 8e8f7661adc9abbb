#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scoredist/histogram.hpp"

namespace scoredist {

enum class Activation { Relu };

// Shape of the small histogram predictor: a multilayer perceptron whose
// output layer is squashed elementwise by a sigmoid and then normalized to
// a distribution over the rating bins.
struct PredictorConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{64};
    std::size_t num_bins = 10;
    Activation activation = Activation::Relu;
    std::uint64_t seed = 0;

    void validate() const;
    // input_dim, hidden..., num_bins
    std::vector<std::size_t> layer_sizes() const;
};

struct LinearLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // row-major, out x in
    std::vector<double> bias;     // out
};

struct PredictorParams {
    PredictorConfig config;
    std::vector<LinearLayer> layers;

    std::size_t parameter_count() const;
};

// Gradients with the same layer shapes as the parameters.
struct ParamGradients {
    std::vector<LinearLayer> layers;
};

// Everything the backward pass needs, cached by forward().
struct ForwardTrace {
    std::vector<std::vector<double>> inputs;           // input to each affine layer
    std::vector<std::vector<double>> pre_activations;  // z per affine layer
    std::vector<double> sigmoid_out;                   // s, each entry in (0,1)
    double sigmoid_sum = 0.0;
    std::vector<double> prediction;                    // ŷ = s / Σs, sums to 1
};

// Deterministic for a fixed config.seed: fan-in-scaled uniform weights,
// zero biases.
PredictorParams init_params(const PredictorConfig& config);

// Throws std::invalid_argument on dimension mismatch or non-finite input.
ForwardTrace forward(const PredictorParams& params, std::span<const double> features);

// Exact gradients of a scalar loss with respect to every weight and bias,
// given d(loss)/d(ŷ). Chains the normalization Jacobian
// ∂ŷ_i/∂s_j = (δ_ij Σs - s_i) / (Σs)^2, the sigmoid derivative s(1-s), and
// the affine layers.
ParamGradients backward(const PredictorParams& params, const ForwardTrace& trace,
                        std::span<const double> loss_grad);

// Wrap the normalized output as a ScoreHistogram on the given scale.
ScoreHistogram prediction_histogram(const ForwardTrace& trace, const RatingScale& scale);

}  // namespace scoredist
