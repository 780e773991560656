#pragma once

#include <cstddef>

#include "edulstm/model.hpp"

namespace edulstm {

enum class ScheduleKind { Constant, Exponential, Cyclical };

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::Constant;
    double alpha0 = 1e-3;  // initial learning rate
    double decay_k = 0.0;  // exponential decay constant, >= 0
    double base_lr = 1e-4;
    double max_lr = 1e-3;
    std::size_t period = 10;  // cyclical period in steps, >= 2

    void validate() const;
};

// constant: alpha0
// exponential: alpha0 * exp(-k t)
// cyclical: triangular wave base + (max-base) * (1 - |2 frac(t/period) - 1|)
double lr_at(const ScheduleSpec& s, std::size_t t);

// w <- w - alpha * g on every entry.
void sgd_step(FusedLstmParams& w, const Gradients& g, double alpha);

struct AdamState {
    Gradients m, v;  // first/second moment accumulators
    std::size_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const FusedLstmParams& like);
};

// Standard bias-corrected Adam:
// t++; m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
// w <- w - alpha * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(FusedLstmParams& w, const Gradients& g, AdamState& state, double alpha);

double global_norm(const Gradients& g);

// Uniformly rescales g so its global L2 norm is at most max_norm; returns it
// untouched when already below.
Gradients clip_gradients(Gradients g, double max_norm);

}  // namespace edulstm
