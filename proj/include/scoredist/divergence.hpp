#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scoredist/histogram.hpp"

namespace scoredist {

// The loss-function zoo. Every kind is a divergence between two score
// histograms; logarithmic kinds use base-2 logs throughout.
enum class DivergenceKind { Ped, Pce, Pjs, Pcs, Pkl, Huber, Ced, Cjs };

inline constexpr std::array<DivergenceKind, 8> all_divergence_kinds = {
    DivergenceKind::Ped, DivergenceKind::Pce,   DivergenceKind::Pjs, DivergenceKind::Pcs,
    DivergenceKind::Pkl, DivergenceKind::Huber, DivergenceKind::Ced, DivergenceKind::Cjs,
};

std::string_view to_string(DivergenceKind kind);
std::optional<DivergenceKind> divergence_kind_from_string(std::string_view name);

// Every analytic gradient of a logarithmic kind requires the predicted
// bins to stay at least this far inside the simplex.
inline constexpr double kGradientBoundary = 1e-9;

// ---------------------------------------------------------------------------
// Span forms. These evaluate the free-vector extension of each loss: no
// simplex validation, so they remain well-defined under the coordinate
// perturbations of a finite-difference check, and the predictor can chain
// through them before its own normalization. `truth` plays y and
// `predicted` plays ŷ; only PCE is order-sensitive.
// ---------------------------------------------------------------------------

double divergence(DivergenceKind kind, std::span<const double> truth,
                  std::span<const double> predicted, double huber_delta = 1.0);

// Analytic d(loss)/d(predicted[i]), treating `predicted` as a free vector.
// Throws GradientBoundaryError when a logarithmic kind is evaluated with a
// predicted bin below kGradientBoundary (or above 1 - kGradientBoundary for
// the cross-entropy).
std::vector<double> divergence_gradient(DivergenceKind kind, std::span<const double> truth,
                                        std::span<const double> predicted,
                                        double huber_delta = 1.0);

// ---------------------------------------------------------------------------
// Histogram forms: validate that both operands share a rating scale.
// ---------------------------------------------------------------------------

double divergence(DivergenceKind kind, const ScoreHistogram& truth,
                  const ScoreHistogram& predicted, double huber_delta = 1.0);

std::vector<double> divergence_gradient(DivergenceKind kind, const ScoreHistogram& truth,
                                        const ScoreHistogram& predicted,
                                        double huber_delta = 1.0);

// Named conveniences.
inline double ped(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Ped, y, yhat);
}
inline double pce(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Pce, y, yhat);
}
inline double pjs(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Pjs, y, yhat);
}
inline double pcs(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Pcs, y, yhat);
}
inline double pkl(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Pkl, y, yhat);
}
inline double huber(const ScoreHistogram& y, const ScoreHistogram& yhat, double delta = 1.0) {
    return divergence(DivergenceKind::Huber, y, yhat, delta);
}
inline double ced(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Ced, y, yhat);
}
inline double cjs(const ScoreHistogram& y, const ScoreHistogram& yhat) {
    return divergence(DivergenceKind::Cjs, y, yhat);
}

}  // namespace scoredist
