#include "scoredist/divergence.hpp"

#include <cmath>
#include <numbers>

namespace scoredist {

namespace {

constexpr double kEps = 1e-12;  // clamp for PCE / PKL log arguments
const double kInvLn2 = 1.0 / std::numbers::ln2;

// a * log2(a / m) with the 0*log 0 == 0 convention.
double xlog2x_over(double a, double m) {
    if (a <= 0.0) return 0.0;
    return a * std::log2(a / m);
}

void check_sizes(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size() || y.empty()) {
        throw std::invalid_argument("divergence operands must have equal nonzero length");
    }
}

std::vector<double> running_sum(std::span<const double> v) {
    std::vector<double> cum(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        cum[i] = acc;
    }
    return cum;
}

// Clamp entries into [eps, 1] and renormalize when anything changed.
// A no-op for histograms that are already strictly interior, which keeps
// the finite-difference view of PKL consistent with its free-vector
// gradient away from the boundary.
std::vector<double> clamped_distribution(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    bool changed = false;
    for (double& x : out) {
        if (x < kEps) {
            x = kEps;
            changed = true;
        } else if (x > 1.0) {
            x = 1.0;
            changed = true;
        }
    }
    if (changed) {
        double sum = 0.0;
        for (const double x : out) sum += x;
        for (double& x : out) x /= sum;
    }
    return out;
}

double ped_value(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return acc;
}

double pce_value(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double q = std::min(std::max(yhat[i], kEps), 1.0 - kEps);
        acc -= y[i] * std::log2(q) + (1.0 - y[i]) * std::log2(1.0 - q);
    }
    return acc;
}

double pjs_value(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = 0.5 * (y[i] + yhat[i]);
        acc += xlog2x_over(y[i], m) + xlog2x_over(yhat[i], m);
    }
    return 0.5 * acc;
}

double pcs_value(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double s = y[i] + yhat[i];
        if (s <= 0.0) continue;
        const double d = y[i] - yhat[i];
        acc += d * d / s;
    }
    return 0.5 * acc;
}

double pkl_value(std::span<const double> y, std::span<const double> yhat) {
    const std::vector<double> p = clamped_distribution(y);
    const std::vector<double> q = clamped_distribution(yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i] * std::log2(p[i] / q[i]) + q[i] * std::log2(q[i] / p[i]);
    }
    return 0.5 * acc;
}

double huber_rho(double r, double delta) {
    const double a = std::abs(r);
    if (a <= delta) return 0.5 * r * r;
    return delta * (a - 0.5 * delta);
}

double huber_value(std::span<const double> y, std::span<const double> yhat, double delta) {
    if (!(delta > 0.0)) {
        throw std::invalid_argument("huber delta must be positive");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += huber_rho(y[i] - yhat[i], delta);
    }
    return acc;
}

double ced_value(std::span<const double> y, std::span<const double> yhat) {
    double accy = 0.0, accq = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        accy += y[i];
        accq += yhat[i];
        const double d = accy - accq;
        loss += d * d;
    }
    return loss;
}

double cjs_value(std::span<const double> y, std::span<const double> yhat) {
    double accy = 0.0, accq = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        accy += y[i];
        accq += yhat[i];
        const double m = 0.5 * (accy + accq);
        loss += xlog2x_over(accy, m) + xlog2x_over(accq, m);
    }
    return 0.5 * loss;
}

void require_interior(std::span<const double> yhat, bool also_below_one) {
    for (const double q : yhat) {
        if (q < kGradientBoundary || (also_below_one && q > 1.0 - kGradientBoundary)) {
            throw GradientBoundaryError();
        }
    }
}

std::vector<double> ped_grad(std::span<const double> y, std::span<const double> yhat) {
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = 2.0 * (yhat[i] - y[i]);
    return g;
}

std::vector<double> pce_grad(std::span<const double> y, std::span<const double> yhat) {
    require_interior(yhat, /*also_below_one=*/true);
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        g[i] = kInvLn2 * ((1.0 - y[i]) / (1.0 - yhat[i]) - y[i] / yhat[i]);
    }
    return g;
}

std::vector<double> pjs_grad(std::span<const double> y, std::span<const double> yhat) {
    require_interior(yhat, false);
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = 0.5 * (y[i] + yhat[i]);
        g[i] = 0.5 * std::log2(yhat[i] / m);
    }
    return g;
}

std::vector<double> pcs_grad(std::span<const double> y, std::span<const double> yhat) {
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double s = y[i] + yhat[i];
        if (s <= 0.0) {
            g[i] = 0.0;
            continue;
        }
        const double d = y[i] - yhat[i];
        g[i] = -d * (2.0 * s + d) / (2.0 * s * s);
    }
    return g;
}

std::vector<double> pkl_grad(std::span<const double> y, std::span<const double> yhat) {
    require_interior(yhat, false);
    // y enters only through the same clamp the value path applies.
    const std::vector<double> p = clamped_distribution(y);
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        g[i] = 0.5 * (std::log2(yhat[i] / p[i]) + kInvLn2 - kInvLn2 * p[i] / yhat[i]);
    }
    return g;
}

std::vector<double> huber_grad(std::span<const double> y, std::span<const double> yhat,
                               double delta) {
    if (!(delta > 0.0)) {
        throw std::invalid_argument("huber delta must be positive");
    }
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - yhat[i];
        const double drho = std::abs(r) <= delta ? r : std::copysign(delta, r);
        g[i] = -drho;
    }
    return g;
}

std::vector<double> ced_grad(std::span<const double> y, std::span<const double> yhat) {
    const std::vector<double> cy = running_sum(y);
    const std::vector<double> cq = running_sum(yhat);
    // dY(j)/dŷ(i) = 1 for j >= i, so each gradient entry is a tail sum.
    std::vector<double> g(y.size());
    double tail = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) {
        tail += 2.0 * (cq[i] - cy[i]);
        g[i] = tail;
    }
    return g;
}

std::vector<double> cjs_grad(std::span<const double> y, std::span<const double> yhat) {
    require_interior(yhat, false);
    const std::vector<double> cy = running_sum(y);
    const std::vector<double> cq = running_sum(yhat);
    std::vector<double> g(y.size());
    double tail = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) {
        const double m = 0.5 * (cy[i] + cq[i]);
        tail += 0.5 * std::log2(cq[i] / m);
        g[i] = tail;
    }
    return g;
}

}  // namespace

std::string_view to_string(DivergenceKind kind) {
    switch (kind) {
        case DivergenceKind::Ped: return "ped";
        case DivergenceKind::Pce: return "pce";
        case DivergenceKind::Pjs: return "pjs";
        case DivergenceKind::Pcs: return "pcs";
        case DivergenceKind::Pkl: return "pkl";
        case DivergenceKind::Huber: return "huber";
        case DivergenceKind::Ced: return "ced";
        case DivergenceKind::Cjs: return "cjs";
    }
    return "?";
}

std::optional<DivergenceKind> divergence_kind_from_string(std::string_view name) {
    for (const DivergenceKind kind : all_divergence_kinds) {
        if (name == to_string(kind)) return kind;
    }
    return std::nullopt;
}

double divergence(DivergenceKind kind, std::span<const double> truth,
                  std::span<const double> predicted, double huber_delta) {
    check_sizes(truth, predicted);
    double v = 0.0;
    switch (kind) {
        case DivergenceKind::Ped: v = ped_value(truth, predicted); break;
        case DivergenceKind::Pce: v = pce_value(truth, predicted); break;
        case DivergenceKind::Pjs: v = pjs_value(truth, predicted); break;
        case DivergenceKind::Pcs: v = pcs_value(truth, predicted); break;
        case DivergenceKind::Pkl: v = pkl_value(truth, predicted); break;
        case DivergenceKind::Huber: v = huber_value(truth, predicted, huber_delta); break;
        case DivergenceKind::Ced: v = ced_value(truth, predicted); break;
        case DivergenceKind::Cjs: v = cjs_value(truth, predicted); break;
    }
    // All kinds are nonnegative; rounding near a minimum may produce -1e-17.
    return v < 0.0 ? 0.0 : v;
}

std::vector<double> divergence_gradient(DivergenceKind kind, std::span<const double> truth,
                                        std::span<const double> predicted, double huber_delta) {
    check_sizes(truth, predicted);
    switch (kind) {
        case DivergenceKind::Ped: return ped_grad(truth, predicted);
        case DivergenceKind::Pce: return pce_grad(truth, predicted);
        case DivergenceKind::Pjs: return pjs_grad(truth, predicted);
        case DivergenceKind::Pcs: return pcs_grad(truth, predicted);
        case DivergenceKind::Pkl: return pkl_grad(truth, predicted);
        case DivergenceKind::Huber: return huber_grad(truth, predicted, huber_delta);
        case DivergenceKind::Ced: return ced_grad(truth, predicted);
        case DivergenceKind::Cjs: return cjs_grad(truth, predicted);
    }
    throw std::invalid_argument("unknown divergence kind");
}

namespace {
void check_scales(const ScoreHistogram& a, const ScoreHistogram& b) {
    if (!(a.scale() == b.scale())) {
        throw ScaleMismatchError("histograms use different rating scales");
    }
}
}  // namespace

double divergence(DivergenceKind kind, const ScoreHistogram& truth,
                  const ScoreHistogram& predicted, double huber_delta) {
    check_scales(truth, predicted);
    return divergence(kind, truth.probs(), predicted.probs(), huber_delta);
}

std::vector<double> divergence_gradient(DivergenceKind kind, const ScoreHistogram& truth,
                                        const ScoreHistogram& predicted, double huber_delta) {
    check_scales(truth, predicted);
    return divergence_gradient(kind, truth.probs(), predicted.probs(), huber_delta);
}

}  // namespace scoredist
