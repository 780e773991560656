#include "edulstm/model.hpp"

#include <algorithm>
#include <cmath>

#include "edulstm/errors.hpp"
#include "edulstm/rng.hpp"

namespace edulstm {

const char* task_name(Task t) {
    switch (t) {
        case Task::NextCorrect: return "next_correct";
        case Task::Grade: return "grade";
        case Task::Engagement: return "engagement";
        case Task::Risk: return "risk";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    if (name == "next_correct") return Task::NextCorrect;
    if (name == "grade") return Task::Grade;
    if (name == "engagement") return Task::Engagement;
    if (name == "risk") return Task::Risk;
    throw ConfigError("unknown task name: " + name);
}

void ModelConfig::validate() const {
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (tasks.empty()) throw ConfigError("at least one task required");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout_rate must be in [0, 1)");
    for (std::size_t i = 0; i < tasks.size(); ++i)
        for (std::size_t j = i + 1; j < tasks.size(); ++j)
            if (tasks[i] == tasks[j])
                throw ConfigError(std::string("duplicate task: ") + task_name(tasks[i]));
}

bool ModelConfig::has_task(Task t) const {
    return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
}

std::size_t ModelConfig::task_index(Task t) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i] == t) return i;
    throw ConfigError(std::string("task not configured: ") + task_name(t));
}

std::size_t FusedLstmParams::count() const {
    std::size_t n = 0;
    for (auto s : param_spans(*this)) n += s.size();
    return n;
}

std::vector<std::span<double>> param_spans(FusedLstmParams& p) {
    std::vector<std::span<double>> out;
    out.reserve(8 + 2 * p.heads.size());
    for (Matrix* m : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) out.emplace_back(m->data);
    for (Vector* v : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) out.emplace_back(*v);
    for (auto& h : p.heads) {
        out.emplace_back(h.w);
        out.emplace_back(&h.b, 1);
    }
    return out;
}

std::vector<std::span<const double>> param_spans(const FusedLstmParams& p) {
    std::vector<std::span<const double>> out;
    out.reserve(8 + 2 * p.heads.size());
    for (const Matrix* m : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) out.emplace_back(m->data);
    for (const Vector* v : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) out.emplace_back(*v);
    for (const auto& h : p.heads) {
        out.emplace_back(h.w);
        out.emplace_back(&h.b, 1);
    }
    return out;
}

FusedLstmParams zeros_like(const FusedLstmParams& p) {
    FusedLstmParams z = p;
    for (auto s : param_spans(z)) std::fill(s.begin(), s.end(), 0.0);
    return z;
}

void accumulate(Gradients& acc, const Gradients& g) {
    auto a = param_spans(acc);
    auto b = param_spans(g);
    if (a.size() != b.size()) throw ShapeError("accumulate: parameter sets differ in structure");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size())
            throw ShapeError("accumulate: array " + std::to_string(i) + " sizes differ (" +
                             std::to_string(a[i].size()) + " vs " + std::to_string(b[i].size()) + ")");
        for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    }
}

void scale_params(FusedLstmParams& p, double s) {
    for (auto sp : param_spans(p))
        for (double& x : sp) x *= s;
}

FusedLstmParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    FusedLstmParams p;
    const std::size_t H = cfg.hidden_dim;
    p.w_f = Matrix(H, cfg.forget_input_dim());
    p.w_i = Matrix(H, cfg.gate_input_dim());
    p.w_c = Matrix(H, cfg.gate_input_dim());
    p.w_o = Matrix(H, cfg.gate_input_dim());
    p.b_f = Vector(H, 1.0);  // ones so early training keeps long-range memory
    p.b_i = Vector(H, 0.0);
    p.b_c = Vector(H, 0.0);
    p.b_o = Vector(H, 0.0);
    p.heads.resize(cfg.tasks.size());
    for (auto& h : p.heads) h.w = Vector(H, 0.0);

    std::mt19937_64 rng(splitmix64(seed));
    auto fill_uniform = [&rng](std::span<double> s, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : s) x = uniform_in(rng, -bound, bound);
    };
    fill_uniform(p.w_f.data, p.w_f.cols);
    fill_uniform(p.w_i.data, p.w_i.cols);
    fill_uniform(p.w_c.data, p.w_c.cols);
    fill_uniform(p.w_o.data, p.w_o.cols);
    for (auto& h : p.heads) fill_uniform(h.w, H);
    return p;
}

CellState zero_state(std::size_t hidden_dim) {
    return CellState{Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)};
}

std::pair<CellState, StepTrace> step(const ModelConfig& cfg, const FusedLstmParams& p,
                                     const CellState& s, const Vector& x, const Vector& z) {
    if (x.size() != cfg.input_dim)
        throw ShapeError("step: x has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(cfg.input_dim));
    if (z.size() != cfg.static_dim)
        throw ShapeError("step: z has length " + std::to_string(z.size()) + ", expected " +
                         std::to_string(cfg.static_dim));
    if (s.h.size() != cfg.hidden_dim || s.c.size() != cfg.hidden_dim)
        throw ShapeError("step: state width " + std::to_string(s.h.size()) + ", expected " +
                         std::to_string(cfg.hidden_dim));

    StepTrace t;
    t.input = concat({s.h, x, z});
    const Vector* u_f = &t.input;
    if (!cfg.fuse_forget_gate) {
        t.forget_input = concat({s.h, x});
        u_f = &t.forget_input;
    }
    t.f = sigmoid(add(matvec(p.w_f, *u_f), p.b_f));
    t.i = sigmoid(add(matvec(p.w_i, t.input), p.b_i));
    t.c_bar = tanh(add(matvec(p.w_c, t.input), p.b_c));
    t.o = sigmoid(add(matvec(p.w_o, t.input), p.b_o));
    t.c_prev = s.c;
    t.c = add(hadamard(t.f, s.c), hadamard(t.i, t.c_bar));
    t.h = hadamard(t.o, tanh(t.c));
    return {CellState{t.h, t.c}, std::move(t)};
}

std::pair<TaskOutputs, ForwardTrace> forward(const ModelConfig& cfg, const FusedLstmParams& p,
                                             const std::vector<Vector>& xs, const Vector& z,
                                             RunMode mode, double dropout_rate,
                                             std::mt19937_64& rng) {
    cfg.validate();
    if (xs.empty()) throw ShapeError("forward: empty sequence");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout_rate must be in [0, 1)");
    if (p.heads.size() != cfg.tasks.size())
        throw ShapeError("forward: params carry " + std::to_string(p.heads.size()) +
                         " heads, config has " + std::to_string(cfg.tasks.size()) + " tasks");

    const std::size_t T = xs.size();
    const std::size_t H = cfg.hidden_dim;
    const bool mask_active = (mode == RunMode::Train) && dropout_rate > 0.0;
    const double keep = 1.0 - dropout_rate;

    ForwardTrace trace;
    trace.steps.reserve(T);
    trace.heads.resize(cfg.tasks.size());

    CellState state = zero_state(H);
    for (std::size_t t = 0; t < T; ++t) {
        auto [next, st] = step(cfg, p, state, xs[t], z);
        st.dropout_mask = Vector(H, 1.0);
        if (mask_active) {
            for (std::size_t j = 0; j < H; ++j)
                st.dropout_mask[j] = uniform01(rng) < keep ? 1.0 / keep : 0.0;
        }
        trace.steps.push_back(std::move(st));
        state = std::move(next);
    }

    TaskOutputs outputs;
    outputs.tasks = cfg.tasks;
    outputs.values.resize(cfg.tasks.size());

    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const HeadParams& head = p.heads[k];
        if (head.w.size() != H)
            throw ShapeError("forward: head " + std::string(task_name(cfg.tasks[k])) +
                             " width " + std::to_string(head.w.size()) + ", expected " +
                             std::to_string(H));
        HeadTrace& ht = trace.heads[k];
        if (cfg.tasks[k] == Task::NextCorrect) {
            ht.logits.resize(T);
            ht.outputs.resize(T);
            for (std::size_t t = 0; t < T; ++t) {
                const Vector d = hadamard(trace.steps[t].dropout_mask, trace.steps[t].h);
                ht.logits[t] = dot(head.w, d) + head.b;
                ht.outputs[t] = sigmoid(ht.logits[t]);
            }
        } else {
            const StepTrace& last = trace.steps.back();
            const Vector d = hadamard(last.dropout_mask, last.h);
            ht.logits = {dot(head.w, d) + head.b};
            ht.outputs = {sigmoid(ht.logits[0])};
        }
        outputs.values[k] = ht.outputs;
    }
    return {std::move(outputs), std::move(trace)};
}

const Vector& TaskOutputs::for_task(Task t) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i] == t) return values[i];
    throw ConfigError(std::string("no output for task: ") + task_name(t));
}

namespace {

double bce(double y, double t) {
    y = std::clamp(y, 1e-12, 1.0 - 1e-12);
    return -(t * std::log(y) + (1.0 - t) * std::log(1.0 - y));
}

void check_loss_args(const ModelConfig& cfg, const TaskOutputs& outputs,
                     const TaskTargets& targets, const Vector& task_weights) {
    if (outputs.values.size() != cfg.tasks.size())
        throw ShapeError("loss: outputs cover " + std::to_string(outputs.values.size()) +
                         " tasks, config has " + std::to_string(cfg.tasks.size()));
    if (targets.values.size() != cfg.tasks.size())
        throw ShapeError("loss: missing targets, got " + std::to_string(targets.values.size()) +
                         " entries for " + std::to_string(cfg.tasks.size()) + " tasks");
    if (task_weights.size() != cfg.tasks.size())
        throw ShapeError("loss: weight count " + std::to_string(task_weights.size()) +
                         " does not match task count " + std::to_string(cfg.tasks.size()));
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const std::size_t T = outputs.values[k].size();
        const std::size_t want = cfg.tasks[k] == Task::NextCorrect ? T - 1 : 1;
        if (targets.values[k].size() != want)
            throw ShapeError(std::string("loss: target for ") + task_name(cfg.tasks[k]) +
                             " has length " + std::to_string(targets.values[k].size()) +
                             ", expected " + std::to_string(want));
    }
}

}  // namespace

double loss(const ModelConfig& cfg, const TaskOutputs& outputs, const TaskTargets& targets,
            const Vector& task_weights) {
    check_loss_args(cfg, outputs, targets, task_weights);
    double total = 0.0;
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const double w = task_weights[k];
        if (w == 0.0) continue;
        const Vector& y = outputs.values[k];
        const Vector& t = targets.values[k];
        if (cfg.tasks[k] == Task::NextCorrect) {
            if (t.empty()) continue;  // single-step sequence: nothing scored
            double acc = 0.0;
            for (std::size_t j = 0; j < t.size(); ++j) acc += bce(y[j], t[j]);
            total += w * acc / static_cast<double>(t.size());
        } else {
            total += w * bce(y[0], t[0]);
        }
    }
    return total;
}

Gradients backward(const ModelConfig& cfg, const FusedLstmParams& p, const ForwardTrace& trace,
                   const TaskTargets& targets, const Vector& task_weights) {
    if (trace.steps.empty()) throw ShapeError("backward: empty trace");
    if (trace.heads.size() != cfg.tasks.size())
        throw ShapeError("backward: trace heads " + std::to_string(trace.heads.size()) +
                         " vs " + std::to_string(cfg.tasks.size()) + " tasks");
    {
        TaskOutputs outs;
        outs.tasks = cfg.tasks;
        for (const auto& ht : trace.heads) outs.values.push_back(ht.outputs);
        check_loss_args(cfg, outs, targets, task_weights);
    }
    const std::size_t T = trace.steps.size();
    const std::size_t H = cfg.hidden_dim;
    if (trace.steps[0].h.size() != H)
        throw ShapeError("backward: trace hidden width " + std::to_string(trace.steps[0].h.size()) +
                         ", params expect " + std::to_string(H));

    Gradients g = zeros_like(p);

    // dL/dlogit per head per timestep; BCE with sigmoid collapses to y - t.
    // Unscored entries (the last next_correct timestep) stay zero.
    std::vector<Vector> dlogit(cfg.tasks.size());
    for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const HeadTrace& ht = trace.heads[k];
        const Vector& t = targets.values[k];
        const double w = task_weights[k];
        if (cfg.tasks[k] == Task::NextCorrect) {
            dlogit[k] = Vector(T, 0.0);
            if (w != 0.0 && !t.empty()) {
                const double inv = 1.0 / static_cast<double>(t.size());
                for (std::size_t j = 0; j < t.size(); ++j)
                    dlogit[k][j] = w * inv * (ht.outputs[j] - t[j]);
            }
        } else {
            dlogit[k] = {w == 0.0 ? 0.0 : w * (ht.outputs[0] - t[0])};
        }
    }

    Vector dh_next(H, 0.0);
    Vector dc_next(H, 0.0);

    for (std::size_t ti = T; ti-- > 0;) {
        const StepTrace& st = trace.steps[ti];
        const Vector d = hadamard(st.dropout_mask, st.h);

        // Head contributions flowing into h at this timestep.
        Vector dh = dh_next;
        for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
            const bool per_step = cfg.tasks[k] == Task::NextCorrect;
            if (!per_step && ti != T - 1) continue;
            const double dl = dlogit[k][per_step ? ti : 0];
            if (dl == 0.0) continue;
            HeadParams& hg = g.heads[k];
            for (std::size_t j = 0; j < H; ++j) hg.w[j] += dl * d[j];
            hg.b += dl;
            const Vector& hw = p.heads[k].w;
            for (std::size_t j = 0; j < H; ++j) dh[j] += dl * hw[j] * st.dropout_mask[j];
        }

        const Vector tanh_c = tanh(st.c);
        Vector da_o(H), dc(H), da_f(H), da_i(H), da_c(H);
        for (std::size_t j = 0; j < H; ++j) {
            da_o[j] = dh[j] * tanh_c[j] * st.o[j] * (1.0 - st.o[j]);
            dc[j] = dh[j] * st.o[j] * (1.0 - tanh_c[j] * tanh_c[j]) + dc_next[j];
            da_f[j] = dc[j] * st.c_prev[j] * st.f[j] * (1.0 - st.f[j]);
            da_i[j] = dc[j] * st.c_bar[j] * st.i[j] * (1.0 - st.i[j]);
            da_c[j] = dc[j] * st.i[j] * (1.0 - st.c_bar[j] * st.c_bar[j]);
            dc_next[j] = dc[j] * st.f[j];
        }

        const Vector& u = st.input;
        const Vector& u_f = cfg.fuse_forget_gate ? st.input : st.forget_input;
        auto add_gate = [H](Matrix& gw, Vector& gb, const Vector& da, const Vector& uin) {
            for (std::size_t r = 0; r < H; ++r) {
                double* row = gw.data.data() + r * gw.cols;
                const double a = da[r];
                for (std::size_t c = 0; c < gw.cols; ++c) row[c] += a * uin[c];
                gb[r] += a;
            }
        };
        add_gate(g.w_f, g.b_f, da_f, u_f);
        add_gate(g.w_i, g.b_i, da_i, u);
        add_gate(g.w_c, g.b_c, da_c, u);
        add_gate(g.w_o, g.b_o, da_o, u);

        // Backprop into h_{t-1}: the first H entries of each gate's input.
        Vector du_f = tmatvec(p.w_f, da_f);
        Vector du_i = tmatvec(p.w_i, da_i);
        Vector du_c = tmatvec(p.w_c, da_c);
        Vector du_o = tmatvec(p.w_o, da_o);
        for (std::size_t j = 0; j < H; ++j)
            dh_next[j] = du_f[j] + du_i[j] + du_c[j] + du_o[j];
    }
    return g;
}

}  // namespace edulstm
