#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edulstm/linalg.hpp"

namespace edulstm {

enum class Task { NextCorrect, Grade, Engagement, Risk };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct ModelConfig {
    std::size_t input_dim = 1;   // per-timestep feature width
    std::size_t static_dim = 0;  // non-temporal feature width, 0 = unfused
    std::size_t hidden_dim = 128;
    std::vector<Task> tasks = {Task::NextCorrect};
    double dropout_rate = 0.5;
    // When false the forget gate sees [h, x] only; the other gates always
    // see [h, x, z].
    bool fuse_forget_gate = true;

    void validate() const;  // throws ConfigError

    std::size_t gate_input_dim() const { return hidden_dim + input_dim + static_dim; }
    std::size_t forget_input_dim() const {
        return fuse_forget_gate ? gate_input_dim() : hidden_dim + input_dim;
    }
    bool has_task(Task t) const;
    std::size_t task_index(Task t) const;  // throws ConfigError when absent
};

struct HeadParams {
    Vector w;       // hidden_dim
    double b = 0.0;

    bool operator==(const HeadParams& o) const = default;
};

// All trainable parameters. Gate matrices act on the concatenated
// [h_prev, x, z] input (the forget gate may omit the z block, see
// ModelConfig::fuse_forget_gate).
struct FusedLstmParams {
    Matrix w_f, w_i, w_c, w_o;
    Vector b_f, b_i, b_c, b_o;
    std::vector<HeadParams> heads;  // aligned with ModelConfig::tasks

    std::size_t count() const;      // total scalar parameter count
    bool operator==(const FusedLstmParams& o) const = default;
};

// Same shape as the parameter set, one slot per parameter.
using Gradients = FusedLstmParams;

// Flat views over every parameter array, in a fixed documented order:
// w_f, w_i, w_c, w_o, b_f, b_i, b_c, b_o, then per head (w, b).
std::vector<std::span<double>> param_spans(FusedLstmParams& p);
std::vector<std::span<const double>> param_spans(const FusedLstmParams& p);

FusedLstmParams zeros_like(const FusedLstmParams& p);
void accumulate(Gradients& acc, const Gradients& g);  // acc += g
void scale_params(FusedLstmParams& p, double s);

// Gate weights are i.i.d. uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)) with
// fan_in the gate's own input width; head weights use fan_in = hidden_dim.
// Biases are zero except the forget-gate bias, which starts at one. Draw
// order is the span order above, row-major within each matrix.
FusedLstmParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct CellState {
    Vector h, c;
};

CellState zero_state(std::size_t hidden_dim);

struct StepTrace {
    Vector input;         // [h_prev, x, z]
    Vector forget_input;  // [h_prev, x] when the forget gate is unfused, else empty
    Vector f, i, c_bar, o;
    Vector c_prev, c, h;
    Vector dropout_mask;  // per-unit factor: 0 or 1/(1-rate); all ones outside train mode
};

struct HeadTrace {
    Vector logits;   // 1 entry for sequence tasks, seq_len for next_correct
    Vector outputs;  // sigmoid(logits)
};

struct ForwardTrace {
    std::vector<StepTrace> steps;
    std::vector<HeadTrace> heads;  // aligned with ModelConfig::tasks
};

// Predictions per task, aligned with ModelConfig::tasks. Sequence tasks
// (grade, engagement, risk) hold one value; next_correct holds one value per
// timestep, where entry t is the predicted correctness of interaction t+1.
struct TaskOutputs {
    std::vector<Task> tasks;
    std::vector<Vector> values;

    const Vector& for_task(Task t) const;
};

enum class RunMode { Train, Infer };

// One cell update: f = sig(Wf u_f + bf), i = sig(Wi u + bi),
// cbar = tanh(Wc u + bc), o = sig(Wo u + bo), c' = f.c + i.cbar,
// h' = o.tanh(c'), with u = [h, x, z].
std::pair<CellState, StepTrace> step(const ModelConfig& cfg, const FusedLstmParams& p,
                                     const CellState& s, const Vector& x, const Vector& z);

// Runs the cell over the whole sequence from a zero state. In train mode an
// inverted-dropout mask (keep prob 1-rate, kept units scaled by 1/(1-rate))
// is drawn per timestep and applied to h before every head; inference uses
// no mask and ignores the rng.
std::pair<TaskOutputs, ForwardTrace> forward(const ModelConfig& cfg, const FusedLstmParams& p,
                                             const std::vector<Vector>& xs, const Vector& z,
                                             RunMode mode, double dropout_rate,
                                             std::mt19937_64& rng);

// Targets aligned with ModelConfig::tasks: one value in [0,1] for sequence
// tasks, seq_len-1 values for next_correct (entry t labels interaction t+1;
// the final timestep's prediction is unscored).
struct TaskTargets {
    std::vector<Vector> values;
};

// Weighted sum of per-task binary cross-entropies; the next_correct term is
// the mean over its scored timesteps. Outputs are clamped to
// [1e-12, 1-1e-12] before the logs.
double loss(const ModelConfig& cfg, const TaskOutputs& outputs, const TaskTargets& targets,
            const Vector& task_weights);

// Exact BPTT gradient of loss() with respect to every parameter, following
// the dropout masks recorded in the trace.
Gradients backward(const ModelConfig& cfg, const FusedLstmParams& p, const ForwardTrace& trace,
                   const TaskTargets& targets, const Vector& task_weights);

}  // namespace edulstm
