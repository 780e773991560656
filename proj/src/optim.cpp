#include "edulstm/optim.hpp"

#include <cmath>
#include <string>

#include "edulstm/errors.hpp"

namespace edulstm {

void ScheduleSpec::validate() const {
    // alpha0 == 0 is allowed so a zero-step-size run stays expressible.
    if (!(alpha0 >= 0.0)) throw ConfigError("schedule: alpha0 must be >= 0");
    if (kind == ScheduleKind::Exponential && decay_k < 0.0)
        throw ConfigError("schedule: exponential decay constant must be >= 0");
    if (kind == ScheduleKind::Cyclical) {
        if (!(base_lr > 0.0 && base_lr <= max_lr))
            throw ConfigError("schedule: cyclical needs 0 < base_lr <= max_lr");
        if (period < 2) throw ConfigError("schedule: cyclical period must be >= 2");
    }
}

double lr_at(const ScheduleSpec& s, std::size_t t) {
    switch (s.kind) {
        case ScheduleKind::Constant:
            return s.alpha0;
        case ScheduleKind::Exponential:
            return s.alpha0 * std::exp(-s.decay_k * static_cast<double>(t));
        case ScheduleKind::Cyclical: {
            // Reducing t first keeps the wave exactly periodic.
            const double frac =
                static_cast<double>(t % s.period) / static_cast<double>(s.period);
            return s.base_lr + (s.max_lr - s.base_lr) * (1.0 - std::abs(2.0 * frac - 1.0));
        }
    }
    return s.alpha0;
}

namespace {

void check_same_structure(const FusedLstmParams& a, const Gradients& b, const char* op) {
    auto sa = param_spans(a);
    auto sb = param_spans(b);
    if (sa.size() != sb.size())
        throw ShapeError(std::string(op) + ": parameter sets differ in structure");
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (sa[i].size() != sb[i].size())
            throw ShapeError(std::string(op) + ": array " + std::to_string(i) +
                             " sizes differ (" + std::to_string(sa[i].size()) + " vs " +
                             std::to_string(sb[i].size()) + ")");
}

}  // namespace

void sgd_step(FusedLstmParams& w, const Gradients& g, double alpha) {
    check_same_structure(w, g, "sgd_step");
    auto ws = param_spans(w);
    auto gs = param_spans(g);
    for (std::size_t i = 0; i < ws.size(); ++i)
        for (std::size_t j = 0; j < ws[i].size(); ++j) ws[i][j] -= alpha * gs[i][j];
}

AdamState AdamState::init(const FusedLstmParams& like) {
    AdamState s;
    s.m = zeros_like(like);
    s.v = zeros_like(like);
    return s;
}

void adam_step(FusedLstmParams& w, const Gradients& g, AdamState& state, double alpha) {
    check_same_structure(w, g, "adam_step");
    check_same_structure(w, state.m, "adam_step");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    auto ws = param_spans(w);
    auto gs = param_spans(g);
    auto ms = param_spans(state.m);
    auto vs = param_spans(state.v);
    for (std::size_t i = 0; i < ws.size(); ++i) {
        for (std::size_t j = 0; j < ws[i].size(); ++j) {
            const double grad = gs[i][j];
            ms[i][j] = state.beta1 * ms[i][j] + (1.0 - state.beta1) * grad;
            vs[i][j] = state.beta2 * vs[i][j] + (1.0 - state.beta2) * grad * grad;
            const double m_hat = ms[i][j] / bc1;
            const double v_hat = vs[i][j] / bc2;
            ws[i][j] -= alpha * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

double global_norm(const Gradients& g) {
    double sq = 0.0;
    for (auto s : param_spans(g))
        for (double x : s) sq += x * x;
    return std::sqrt(sq);
}

Gradients clip_gradients(Gradients g, double max_norm) {
    if (!(max_norm > 0.0)) throw ConfigError("clip_gradients: max_norm must be > 0");
    const double norm = global_norm(g);
    if (norm <= max_norm) return g;
    scale_params(g, max_norm / norm);
    return g;
}

}  // namespace edulstm
