#include "scoredist/predictor.hpp"

#include <cmath>

#include "scoredist/rng.hpp"

namespace scoredist {

void PredictorConfig::validate() const {
    if (input_dim < 1) {
        throw std::invalid_argument("predictor input_dim must be at least 1");
    }
    if (num_bins < 2) {
        throw std::invalid_argument("predictor num_bins must be at least 2");
    }
    for (const std::size_t dim : hidden_dims) {
        if (dim < 1) {
            throw std::invalid_argument("hidden layer widths must be positive");
        }
    }
}

std::vector<std::size_t> PredictorConfig::layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(hidden_dims.size() + 2);
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden_dims.begin(), hidden_dims.end());
    sizes.push_back(num_bins);
    return sizes;
}

std::size_t PredictorParams::parameter_count() const {
    std::size_t count = 0;
    for (const LinearLayer& layer : layers) {
        count += layer.weights.size() + layer.bias.size();
    }
    return count;
}

PredictorParams init_params(const PredictorConfig& config) {
    config.validate();
    Rng rng(config.seed);
    PredictorParams params;
    params.config = config;
    const std::vector<std::size_t> sizes = config.layer_sizes();
    params.layers.resize(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        LinearLayer& layer = params.layers[l];
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.weights.resize(layer.in * layer.out);
        layer.bias.assign(layer.out, 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    }
    return params;
}

namespace {

std::vector<double> affine(const LinearLayer& layer, std::span<const double> x) {
    std::vector<double> z(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
        double acc = layer.bias[r];
        const double* row = layer.weights.data() + r * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * x[c];
        z[r] = acc;
    }
    return z;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ForwardTrace forward(const PredictorParams& params, std::span<const double> features) {
    if (features.size() != params.config.input_dim) {
        throw std::invalid_argument("feature vector length does not match predictor input_dim");
    }
    for (const double x : features) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("feature vector contains a non-finite value");
        }
    }

    ForwardTrace trace;
    trace.inputs.reserve(params.layers.size());
    trace.pre_activations.reserve(params.layers.size());

    std::vector<double> activation(features.begin(), features.end());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        trace.inputs.push_back(activation);
        std::vector<double> z = affine(params.layers[l], activation);
        trace.pre_activations.push_back(z);
        if (l + 1 < params.layers.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;  // relu
            activation = std::move(z);
        }
    }

    const std::vector<double>& out = trace.pre_activations.back();
    trace.sigmoid_out.resize(out.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        trace.sigmoid_out[i] = sigmoid(out[i]);
        sum += trace.sigmoid_out[i];
    }
    trace.sigmoid_sum = sum;
    trace.prediction.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        trace.prediction[i] = trace.sigmoid_out[i] / sum;
    }
    return trace;
}

ParamGradients backward(const PredictorParams& params, const ForwardTrace& trace,
                        std::span<const double> loss_grad) {
    const std::size_t num_layers = params.layers.size();
    if (trace.inputs.size() != num_layers || trace.pre_activations.size() != num_layers ||
        loss_grad.size() != params.config.num_bins ||
        trace.prediction.size() != params.config.num_bins) {
        throw std::invalid_argument("backward: trace or loss gradient shape mismatch");
    }

    ParamGradients grads;
    grads.layers.resize(num_layers);

    // Normalization: dL/ds_j = (g_j - Σ_i g_i ŷ_i) / Σs.
    double g_dot_yhat = 0.0;
    for (std::size_t i = 0; i < loss_grad.size(); ++i) {
        g_dot_yhat += loss_grad[i] * trace.prediction[i];
    }
    std::vector<double> delta(loss_grad.size());
    for (std::size_t j = 0; j < delta.size(); ++j) {
        const double ds = (loss_grad[j] - g_dot_yhat) / trace.sigmoid_sum;
        const double s = trace.sigmoid_out[j];
        delta[j] = ds * s * (1.0 - s);  // through the sigmoid
    }

    for (std::size_t l = num_layers; l-- > 0;) {
        const LinearLayer& layer = params.layers[l];
        LinearLayer& grad = grads.layers[l];
        grad.in = layer.in;
        grad.out = layer.out;
        grad.weights.resize(layer.weights.size());
        grad.bias.resize(layer.bias.size());

        const std::vector<double>& input = trace.inputs[l];
        for (std::size_t r = 0; r < layer.out; ++r) {
            grad.bias[r] = delta[r];
            double* wrow = grad.weights.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) wrow[c] = delta[r] * input[c];
        }

        if (l == 0) break;
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            const double* row = layer.weights.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) prev[c] += row[c] * delta[r];
        }
        const std::vector<double>& z_prev = trace.pre_activations[l - 1];
        for (std::size_t c = 0; c < layer.in; ++c) {
            prev[c] = z_prev[c] > 0.0 ? prev[c] : 0.0;  // relu'
        }
        delta = std::move(prev);
    }
    return grads;
}

ScoreHistogram prediction_histogram(const ForwardTrace& trace, const RatingScale& scale) {
    return ScoreHistogram(scale, trace.prediction);
}

}  // namespace scoredist
