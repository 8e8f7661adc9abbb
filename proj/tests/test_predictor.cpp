#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scoredist/divergence.hpp"
#include "scoredist/predictor.hpp"

using namespace scoredist;

namespace {

PredictorConfig small_config(std::uint64_t seed = 5) {
    PredictorConfig config;
    config.input_dim = 16;
    config.hidden_dims = {64};
    config.num_bins = 10;
    config.seed = seed;
    return config;
}

// Straight-line re-implementation of the forward pass for cross-checking.
std::vector<double> independent_forward(const PredictorParams& params,
                                        const std::vector<double>& features) {
    std::vector<double> x = features;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const LinearLayer& layer = params.layers[l];
        std::vector<double> z(layer.out, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            z[r] = layer.bias[r];
            for (std::size_t c = 0; c < layer.in; ++c) {
                z[r] += layer.weights[r * layer.in + c] * x[c];
            }
        }
        if (l + 1 < params.layers.size()) {
            for (double& v : z) v = std::max(v, 0.0);
        }
        x = z;
    }
    double total = 0.0;
    for (double& v : x) {
        v = 1.0 / (1.0 + std::exp(-v));
        total += v;
    }
    for (double& v : x) v /= total;
    return x;
}

std::vector<double> random_features(Rng& rng, std::size_t n) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    return x;
}

}  // namespace

TEST_CASE("parameter count matches the shape arithmetic") {
    const PredictorParams params = init_params(small_config());
    CHECK(params.parameter_count() == 16 * 64 + 64 + 64 * 10 + 10);
    CHECK(params.parameter_count() == 1738);
}

TEST_CASE("initialization is deterministic in the seed") {
    const PredictorParams a = init_params(small_config(42));
    const PredictorParams b = init_params(small_config(42));
    const PredictorParams c = init_params(small_config(43));
    REQUIRE(a.layers.size() == b.layers.size());
    bool identical = true;
    bool differs_from_c = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) {
            identical = identical && a.layers[l].weights[i] == b.layers[l].weights[i];
            differs_from_c =
                differs_from_c || a.layers[l].weights[i] != c.layers[l].weights[i];
        }
        for (const double bias : a.layers[l].bias) CHECK(bias == 0.0);
    }
    CHECK(identical);
    CHECK(differs_from_c);
}

TEST_CASE("config validation") {
    PredictorConfig config = small_config();
    config.input_dim = 0;
    CHECK_THROWS_AS(init_params(config), std::invalid_argument);
    config = small_config();
    config.num_bins = 1;
    CHECK_THROWS_AS(init_params(config), std::invalid_argument);
}

TEST_CASE("zero parameters yield the uniform distribution") {
    PredictorParams params = init_params(small_config());
    for (LinearLayer& layer : params.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    const ForwardTrace trace = forward(params, std::vector<double>(16, 0.7));
    for (const double s : trace.sigmoid_out) CHECK(s == 0.5);
    for (const double p : trace.prediction) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("forward output is a strictly interior distribution") {
    Rng rng(12);
    const PredictorParams params = init_params(small_config(9));
    for (int trial = 0; trial < 50; ++trial) {
        const ForwardTrace trace = forward(params, random_features(rng, 16));
        double sum = 0.0;
        for (const double p : trace.prediction) {
            CHECK(p > 0.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (const double s : trace.sigmoid_out) {
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
        CHECK_NOTHROW(prediction_histogram(trace, default_scale()));
    }
}

TEST_CASE("forward matches an independent implementation") {
    Rng rng(13);
    PredictorConfig config = small_config(21);
    config.hidden_dims = {32, 24};
    const PredictorParams params = init_params(config);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = random_features(rng, 16);
        const ForwardTrace trace = forward(params, x);
        const std::vector<double> expected = independent_forward(params, x);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(trace.prediction[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward input validation") {
    const PredictorParams params = init_params(small_config());
    CHECK_THROWS_AS(forward(params, std::vector<double>(15, 0.0)), std::invalid_argument);
    std::vector<double> bad(16, 0.0);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(params, bad), std::invalid_argument);
}

TEST_CASE("backward with a zero loss gradient is zero") {
    Rng rng(14);
    const PredictorParams params = init_params(small_config(3));
    const ForwardTrace trace = forward(params, random_features(rng, 16));
    const ParamGradients grads = backward(params, trace, std::vector<double>(10, 0.0));
    for (const LinearLayer& layer : grads.layers) {
        for (const double g : layer.weights) CHECK(g == 0.0);
        for (const double g : layer.bias) CHECK(g == 0.0);
    }
}

TEST_CASE("normalization makes uniform loss-gradient shifts vanish") {
    Rng rng(15);
    const PredictorParams params = init_params(small_config(4));
    const ForwardTrace trace = forward(params, random_features(rng, 16));
    std::vector<double> g(10);
    for (double& v : g) v = rng.uniform(-1.0, 1.0);
    std::vector<double> shifted = g;
    for (double& v : shifted) v += 3.25;

    const ParamGradients a = backward(params, trace, g);
    const ParamGradients b = backward(params, trace, shifted);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) {
            CHECK(a.layers[l].weights[i] ==
                  doctest::Approx(b.layers[l].weights[i]).epsilon(1e-11));
        }
    }
}

TEST_CASE("backward shape validation") {
    Rng rng(16);
    const PredictorParams params = init_params(small_config(6));
    const ForwardTrace trace = forward(params, random_features(rng, 16));
    CHECK_THROWS_AS(backward(params, trace, std::vector<double>(9, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
    Rng rng(17);
    PredictorConfig config;
    config.input_dim = 6;
    config.hidden_dims = {12};
    config.num_bins = 10;
    config.seed = 77;
    PredictorParams params = init_params(config);
    const std::vector<double> x = random_features(rng, 6);
    const std::vector<double> y = oracles::random_interior_histogram(rng, 10);

    for (const DivergenceKind kind : all_divergence_kinds) {
        const ForwardTrace trace = forward(params, x);
        const std::vector<double> loss_grad = divergence_gradient(kind, y, trace.prediction);
        const ParamGradients analytic = backward(params, trace, loss_grad);

        constexpr double h = 1e-5;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            LinearLayer& layer = params.layers[l];
            const std::size_t weight_count = layer.weights.size();
            for (std::size_t i = 0; i < weight_count + layer.bias.size(); ++i) {
                double& w =
                    i < weight_count ? layer.weights[i] : layer.bias[i - weight_count];
                const double expected = i < weight_count
                                            ? analytic.layers[l].weights[i]
                                            : analytic.layers[l].bias[i - weight_count];
                const double saved = w;
                w = saved + h;
                const double up = divergence(kind, y, forward(params, x).prediction);
                w = saved - h;
                const double down = divergence(kind, y, forward(params, x).prediction);
                w = saved;
                const double numeric = (up - down) / (2.0 * h);
                CHECK(oracles::gradcheck_relative_error(expected, numeric) < 1e-5);
            }
        }
    }
}
