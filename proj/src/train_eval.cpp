#include "edulstm/train_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "edulstm/errors.hpp"
#include "edulstm/rng.hpp"

namespace edulstm {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("train: threshold must be in (0,1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("train: dropout_rate must be in [0, 1)");
    for (double w : loss_weights)
        if (w < 0.0) throw ConfigError("train: loss weights must be nonnegative");
    schedule.validate();
}

TaskMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                std::uint64_t tn) {
    TaskMetrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    const std::uint64_t total = tp + fp + fn + tn;
    m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
    m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

const TaskMetrics& Metrics::for_task(Task t) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i] == t) return per_task[i];
    throw ConfigError(std::string("no metrics for task: ") + task_name(t));
}

TaskTargets targets_for(const ModelConfig& cfg, const EncodedSequence& seq) {
    TaskTargets t;
    t.values.reserve(cfg.tasks.size());
    for (Task task : cfg.tasks) {
        switch (task) {
            case Task::NextCorrect: t.values.push_back(seq.next_correct); break;
            case Task::Grade: t.values.push_back({seq.grade}); break;
            case Task::Engagement: t.values.push_back({seq.engagement}); break;
            case Task::Risk: t.values.push_back({seq.risk}); break;
        }
    }
    return t;
}

BatchGradient batch_gradients(const ModelConfig& cfg, const FusedLstmParams& params,
                              const std::vector<EncodedSequence>& seqs,
                              const std::vector<std::size_t>& batch_indices,
                              const Vector& task_weights, double dropout_rate,
                              std::uint64_t dropout_seed_root, bool parallel) {
    const std::size_t n = batch_indices.size();
    if (n == 0) throw ConfigError("batch_gradients: empty batch");

    std::vector<Gradients> per_seq(n);
    std::vector<double> per_loss(n, 0.0);
    std::exception_ptr error;

    (void)parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(n); ++bi) {
        try {
            const std::size_t idx = batch_indices[static_cast<std::size_t>(bi)];
            const EncodedSequence& seq = seqs[idx];
            std::mt19937_64 rng(mix_seed(dropout_seed_root, idx));
            auto [outputs, trace] =
                forward(cfg, params, seq.xs, seq.z, RunMode::Train, dropout_rate, rng);
            const TaskTargets targets = targets_for(cfg, seq);
            per_loss[static_cast<std::size_t>(bi)] = loss(cfg, outputs, targets, task_weights);
            per_seq[static_cast<std::size_t>(bi)] = backward(cfg, params, trace, targets, task_weights);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    // Fixed-order reduction keeps the result bitwise identical regardless of
    // thread count.
    BatchGradient out;
    out.grad = std::move(per_seq[0]);
    double total = per_loss[0];
    for (std::size_t i = 1; i < n; ++i) {
        accumulate(out.grad, per_seq[i]);
        total += per_loss[i];
    }
    scale_params(out.grad, 1.0 / static_cast<double>(n));
    out.mean_loss = total / static_cast<double>(n);
    return out;
}

TrainResult train(const std::vector<StudentRecord>& records, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const EncodingConfig& enc) {
    cfg.validate();
    model_cfg.validate();
    if (records.empty()) throw ConfigError("train: empty training set");
    if (enc.feature_dim() != model_cfg.input_dim)
        throw ShapeError("train: encoder feature width " + std::to_string(enc.feature_dim()) +
                         " does not match model input_dim " + std::to_string(model_cfg.input_dim));
    if (enc.static_dim != model_cfg.static_dim)
        throw ShapeError("train: encoder static width " + std::to_string(enc.static_dim) +
                         " does not match model static_dim " + std::to_string(model_cfg.static_dim));

    std::vector<EncodedSequence> seqs;
    seqs.reserve(records.size());
    for (const auto& rec : records) seqs.push_back(encode(rec, enc));

    Vector weights = cfg.loss_weights;
    if (weights.empty()) weights = Vector(model_cfg.tasks.size(), 1.0);
    if (weights.size() != model_cfg.tasks.size())
        throw ShapeError("train: " + std::to_string(weights.size()) + " loss weights for " +
                         std::to_string(model_cfg.tasks.size()) + " tasks");

    TrainResult result;
    result.init_seed = mix_seed(cfg.seed, 0x1117);
    result.params = init_params(model_cfg, result.init_seed);

    AdamState adam = AdamState::init(result.params);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5481));

    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t batch_counter = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_deterministic(order, shuffle_rng);
        const std::uint64_t dropout_root = mix_seed(cfg.seed, 0xD409, static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        double first_lr = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchGradient bg = batch_gradients(model_cfg, result.params, seqs, batch, weights,
                                               cfg.dropout_rate, dropout_root, cfg.parallel_batch);
            if (!std::isfinite(bg.mean_loss))
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(n_batches));
            loss_sum += bg.mean_loss * static_cast<double>(batch.size());

            const std::size_t sched_t = cfg.schedule_unit == ScheduleUnit::Epoch
                                            ? static_cast<std::size_t>(epoch)
                                            : batch_counter;
            const double lr = lr_at(cfg.schedule, sched_t);
            if (n_batches == 0) first_lr = lr;

            Gradients g = cfg.clip_norm > 0.0 ? clip_gradients(std::move(bg.grad), cfg.clip_norm)
                                              : std::move(bg.grad);
            if (cfg.optimizer == OptimizerKind::Adam)
                adam_step(result.params, g, adam, lr);
            else
                sgd_step(result.params, g, lr);
            ++batch_counter;
            ++n_batches;
        }
        result.epoch_logs.push_back(
            EpochLog{epoch, first_lr, loss_sum / static_cast<double>(seqs.size())});
    }
    return result;
}

namespace {

struct Counts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    void tally(bool predicted, bool actual) {
        if (predicted && actual) ++tp;
        else if (predicted && !actual) ++fp;
        else if (!predicted && actual) ++fn;
        else ++tn;
    }
};

// Scored next_correct pairs: prediction index i (event i) labels event i+1.
template <typename Fn>
void for_each_scored(const StudentRecord& rec, Fn&& fn) {
    for (std::size_t i = 0; i + 1 < rec.events.size(); ++i) fn(i, rec.events[i + 1].correct);
}

Metrics metrics_single_task(Task task, const Counts& c) {
    Metrics m;
    m.tasks = {task};
    m.per_task = {metrics_from_counts(c.tp, c.fp, c.fn, c.tn)};
    return m;
}

}  // namespace

Metrics evaluate(const FusedLstmParams& params, const ModelConfig& model_cfg,
                 const std::vector<StudentRecord>& records, const EncodingConfig& enc,
                 double threshold) {
    if (records.empty()) throw ConfigError("evaluate: empty evaluation set");
    std::vector<Counts> counts(model_cfg.tasks.size());
    std::mt19937_64 rng(0);  // unused in inference mode

    for (const auto& rec : records) {
        const EncodedSequence seq = encode(rec, enc);
        auto [outputs, trace] =
            forward(model_cfg, params, seq.xs, seq.z, RunMode::Infer, 0.0, rng);
        const TaskTargets targets = targets_for(model_cfg, seq);
        for (std::size_t k = 0; k < model_cfg.tasks.size(); ++k) {
            const Vector& y = outputs.values[k];
            const Vector& t = targets.values[k];
            if (model_cfg.tasks[k] == Task::NextCorrect) {
                for (std::size_t j = 0; j < t.size(); ++j)
                    counts[k].tally(y[j] >= threshold, t[j] != 0.0);
            } else {
                counts[k].tally(y[0] >= threshold, t[0] >= 0.5);
            }
        }
    }
    Metrics m;
    m.tasks = model_cfg.tasks;
    for (const auto& c : counts) m.per_task.push_back(metrics_from_counts(c.tp, c.fp, c.fn, c.tn));
    return m;
}

const char* method_name(Method m) {
    switch (m) {
        case Method::FusedLstm: return "fused_lstm";
        case Method::Majority: return "majority";
        case Method::Logreg: return "logreg";
        case Method::KnnEuclidean: return "knn_euclidean";
        case Method::KnnDtw: return "knn_dtw";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "fused_lstm") return Method::FusedLstm;
    if (name == "majority") return Method::Majority;
    if (name == "logreg") return Method::Logreg;
    if (name == "knn_euclidean") return Method::KnnEuclidean;
    if (name == "knn_dtw") return Method::KnnDtw;
    throw ConfigError("unknown method name: " + name);
}

Metrics baseline_majority(const std::vector<StudentRecord>& train,
                          const std::vector<StudentRecord>& test) {
    if (train.empty()) throw ConfigError("baseline_majority: empty training set");
    std::uint64_t ones = 0, total = 0;
    for (const auto& rec : train)
        for_each_scored(rec, [&](std::size_t, bool actual) {
            ones += actual ? 1 : 0;
            ++total;
        });
    const bool majority = 2 * ones >= total;  // tie predicts correct

    Counts c;
    for (const auto& rec : test)
        for_each_scored(rec, [&](std::size_t, bool actual) { c.tally(majority, actual); });
    return metrics_single_task(Task::NextCorrect, c);
}

double LogRegModel::predict(const Vector& x) const { return sigmoid(dot(w, x) + b); }

LogRegModel logreg_fit(const std::vector<Vector>& xs, const Vector& ys, double lr,
                       std::size_t iters) {
    if (xs.empty()) throw ConfigError("logreg_fit: no training instances");
    if (xs.size() != ys.size())
        throw ShapeError("logreg_fit: " + std::to_string(xs.size()) + " instances vs " +
                         std::to_string(ys.size()) + " labels");
    const std::size_t d = xs[0].size();
    LogRegModel model;
    model.w = Vector(d, 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t it = 0; it < iters; ++it) {
        Vector gw(d, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double err = model.predict(xs[i]) - ys[i];
            for (std::size_t j = 0; j < d; ++j) gw[j] += err * xs[i][j];
            gb += err;
        }
        for (std::size_t j = 0; j < d; ++j) model.w[j] -= lr * gw[j] * inv_n;
        model.b -= lr * gb * inv_n;
    }
    return model;
}

namespace {

// Per-interaction history features: mean correctness so far, mean elapsed so
// far, event count, then the student's static features.
Vector history_features(const StudentRecord& rec, std::size_t upto) {
    double correct = 0.0, elapsed = 0.0;
    for (std::size_t i = 0; i <= upto; ++i) {
        correct += rec.events[i].correct ? 1.0 : 0.0;
        elapsed += static_cast<double>(rec.events[i].elapsed_ms);
    }
    const double n = static_cast<double>(upto + 1);
    Vector x = {correct / n, elapsed / n, n};
    x.insert(x.end(), rec.static_features.begin(), rec.static_features.end());
    return x;
}

Vector aggregate_features(const StudentRecord& rec) {
    return history_features(rec, rec.events.size() - 1);
}

struct Standardizer {
    Vector mean, inv_std;

    static Standardizer fit(const std::vector<Vector>& xs) {
        const std::size_t d = xs[0].size();
        Standardizer s;
        s.mean = Vector(d, 0.0);
        s.inv_std = Vector(d, 1.0);
        for (const auto& x : xs)
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += x[j];
        for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(xs.size());
        Vector var(d, 0.0);
        for (const auto& x : xs)
            for (std::size_t j = 0; j < d; ++j) {
                const double dlt = x[j] - s.mean[j];
                var[j] += dlt * dlt;
            }
        for (std::size_t j = 0; j < d; ++j) {
            const double v = var[j] / static_cast<double>(xs.size());
            s.inv_std[j] = v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0;
        }
        return s;
    }

    Vector apply(Vector x) const {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) * inv_std[j];
        return x;
    }
};

Vector correctness_sequence(const StudentRecord& rec) {
    Vector s(rec.events.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = rec.events[i].correct ? 1.0 : 0.0;
    return s;
}

}  // namespace

Metrics baseline_logreg(const std::vector<StudentRecord>& train,
                        const std::vector<StudentRecord>& test, double lr, std::size_t iters) {
    std::vector<Vector> xs;
    Vector ys;
    for (const auto& rec : train)
        for_each_scored(rec, [&](std::size_t i, bool actual) {
            xs.push_back(history_features(rec, i));
            ys.push_back(actual ? 1.0 : 0.0);
        });
    if (xs.empty()) throw ConfigError("baseline_logreg: no scored training interactions");

    const Standardizer std_ = Standardizer::fit(xs);
    for (auto& x : xs) x = std_.apply(std::move(x));
    const LogRegModel model = logreg_fit(xs, ys, lr, iters);

    Counts c;
    for (const auto& rec : test)
        for_each_scored(rec, [&](std::size_t i, bool actual) {
            const double p = model.predict(std_.apply(history_features(rec, i)));
            c.tally(p >= 0.5, actual);
        });
    return metrics_single_task(Task::NextCorrect, c);
}

double dtw_distance(const Vector& a, const Vector& b) {
    if (a.empty() || b.empty()) throw ShapeError("dtw_distance: empty sequence");
    const std::size_t n = a.size(), m = b.size();
    Vector prev(m), cur(m);
    for (std::size_t j = 0; j < m; ++j)
        prev[j] = std::abs(a[0] - b[j]) + (j ? prev[j - 1] : 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        cur[0] = std::abs(a[i] - b[0]) + prev[0];
        for (std::size_t j = 1; j < m; ++j)
            cur[j] = std::abs(a[i] - b[j]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

Metrics baseline_knn(const std::vector<StudentRecord>& train,
                     const std::vector<StudentRecord>& test, std::size_t k, KnnDistance distance) {
    if (k == 0) throw ConfigError("baseline_knn: k must be >= 1");
    if (k > train.size())
        throw ConfigError("baseline_knn: k=" + std::to_string(k) + " exceeds training set size " +
                          std::to_string(train.size()));

    // Neighbor votes carry each training student's "mostly correct" label.
    std::vector<bool> labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        labels[i] = derive_labels(train[i]).grade >= 0.5;

    std::vector<Vector> train_feats(train.size());
    Standardizer std_;
    if (distance == KnnDistance::EuclideanAggregate) {
        for (std::size_t i = 0; i < train.size(); ++i)
            train_feats[i] = aggregate_features(train[i]);
        std_ = Standardizer::fit(train_feats);
        for (auto& f : train_feats) f = std_.apply(std::move(f));
    } else {
        for (std::size_t i = 0; i < train.size(); ++i)
            train_feats[i] = correctness_sequence(train[i]);
    }

    Counts c;
    for (const auto& rec : test) {
        const Vector query = distance == KnnDistance::EuclideanAggregate
                                 ? std_.apply(aggregate_features(rec))
                                 : correctness_sequence(rec);
        std::vector<std::pair<double, std::size_t>> dists(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            double d;
            if (distance == KnnDistance::EuclideanAggregate) {
                const Vector diff = sub(query, train_feats[i]);
                d = std::sqrt(dot(diff, diff));
            } else {
                d = dtw_distance(query, train_feats[i]);
            }
            dists[i] = {d, i};
        }
        std::sort(dists.begin(), dists.end());  // ties break on training index
        std::size_t votes = 0;
        for (std::size_t i = 0; i < k; ++i) votes += labels[dists[i].second] ? 1 : 0;
        const bool predicted = 2 * votes >= k;
        for_each_scored(rec, [&](std::size_t, bool actual) { c.tally(predicted, actual); });
    }
    return metrics_single_task(Task::NextCorrect, c);
}

namespace {

Metrics run_method(Method method, const std::vector<StudentRecord>& train_records,
                   const std::vector<StudentRecord>& test_records, const TrainConfig& cfg,
                   const ModelConfig& model_cfg_base, std::size_t hash_buckets) {
    switch (method) {
        case Method::FusedLstm: {
            const EncodingConfig enc = EncodingConfig::fit(train_records, hash_buckets);
            ModelConfig mc = model_cfg_base;
            mc.input_dim = enc.feature_dim();
            mc.static_dim = enc.static_dim;
            // Every fold trains from the same seed, so folds with identical
            // content produce identical metrics.
            const TrainResult res = train(train_records, cfg, mc, enc);
            return evaluate(res.params, mc, test_records, enc, cfg.threshold);
        }
        case Method::Majority:
            return baseline_majority(train_records, test_records);
        case Method::Logreg:
            return baseline_logreg(train_records, test_records, 0.5, 300);
        case Method::KnnEuclidean:
        case Method::KnnDtw: {
            const std::size_t k = std::min<std::size_t>(5, train_records.size());
            return baseline_knn(train_records, test_records, k,
                                method == Method::KnnEuclidean ? KnnDistance::EuclideanAggregate
                                                               : KnnDistance::Dtw);
        }
    }
    throw ConfigError("unknown method");
}

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

CvReport cross_validate(const std::vector<StudentRecord>& records, const FoldPlan& plan,
                        const TrainConfig& cfg, const ModelConfig& model_cfg_base,
                        std::size_t hash_buckets, const std::vector<Method>& methods,
                        int parallel_folds) {
    plan.validate(records.size());
    for (const auto& rec : records)
        if (!plan.assignment.count(rec.student_id))
            throw ConfigError("cross_validate: student '" + rec.student_id + "' missing from plan");
    if (methods.empty()) throw ConfigError("cross_validate: no methods given");
    cfg.validate();

    CvReport report;
    report.k = plan.k;
    report.methods = methods;
    report.per_fold.assign(methods.size(), std::vector<Metrics>(static_cast<std::size_t>(plan.k)));

    std::exception_ptr error;
    const int n_threads = std::max(1, parallel_folds);

#ifdef _OPENMP
#pragma omp parallel for num_threads(n_threads) schedule(dynamic) if (n_threads > 1)
#endif
    for (int fold = 0; fold < plan.k; ++fold) {
        try {
            std::vector<StudentRecord> train_records, test_records;
            for (const auto& rec : records) {
                if (plan.assignment.at(rec.student_id) == fold)
                    test_records.push_back(rec);
                else
                    train_records.push_back(rec);
            }
            for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                try {
                    report.per_fold[mi][static_cast<std::size_t>(fold)] =
                        run_method(methods[mi], train_records, test_records, cfg,
                                   model_cfg_base, hash_buckets);
                } catch (const std::exception& e) {
                    throw TrainError(std::string("method ") + method_name(methods[mi]) +
                                     " failed on fold " + std::to_string(fold) + ": " + e.what());
                }
            }
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return report;
}

namespace {

double metric_value(const TaskMetrics& m, const std::string& metric) {
    if (metric == "accuracy") return m.accuracy;
    if (metric == "precision") return m.precision;
    if (metric == "recall") return m.recall;
    if (metric == "f1") return m.f1;
    throw ConfigError("unknown metric: " + metric);
}

}  // namespace

namespace {

std::vector<double> fold_values(const CvReport& r, Method m, Task t, const std::string& metric) {
    for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
        if (r.methods[mi] != m) continue;
        std::vector<double> vals;
        for (const auto& fold : r.per_fold[mi]) vals.push_back(metric_value(fold.for_task(t), metric));
        return vals;
    }
    throw ConfigError(std::string("method not in report: ") + method_name(m));
}

bool all_equal(const std::vector<double>& v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

}  // namespace

double CvReport::mean_metric(Method m, Task t, const std::string& metric) const {
    const std::vector<double> vals = fold_values(*this, m, t, metric);
    if (all_equal(vals)) return vals[0];  // keeps degenerate folds exact
    double sum = 0.0;
    for (double v : vals) sum += v;
    return sum / static_cast<double>(vals.size());
}

double CvReport::std_metric(Method m, Task t, const std::string& metric) const {
    const std::vector<double> vals = fold_values(*this, m, t, metric);
    if (vals.size() < 2 || all_equal(vals)) return 0.0;
    const double mean = mean_metric(m, t, metric);
    double sq = 0.0;
    for (double v : vals) {
        const double d = v - mean;
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(vals.size() - 1));
}

std::string CvReport::to_csv(const std::string& config_hash) const {
    std::ostringstream out;
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "method,fold,task,accuracy,precision,recall,f1,tp,fp,fn,tn\n";
    static const char* kMetrics[4] = {"accuracy", "precision", "recall", "f1"};
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t f = 0; f < per_fold[mi].size(); ++f) {
            const Metrics& fm = per_fold[mi][f];
            for (std::size_t ti = 0; ti < fm.tasks.size(); ++ti) {
                const TaskMetrics& tm = fm.per_task[ti];
                out << method_name(methods[mi]) << ',' << f << ',' << task_name(fm.tasks[ti])
                    << ',' << fmt(tm.accuracy) << ',' << fmt(tm.precision) << ','
                    << fmt(tm.recall) << ',' << fmt(tm.f1) << ',' << tm.tp << ',' << tm.fp << ','
                    << tm.fn << ',' << tm.tn << '\n';
            }
        }
        for (const char* agg : {"mean", "std"}) {
            const Metrics& first = per_fold[mi][0];
            for (Task t : first.tasks) {
                out << method_name(methods[mi]) << ',' << agg << ',' << task_name(t);
                for (const char* metric : kMetrics) {
                    const double v = std::string(agg) == "mean" ? mean_metric(methods[mi], t, metric)
                                                                : std_metric(methods[mi], t, metric);
                    out << ',' << fmt(v);
                }
                out << ",,,,\n";
            }
        }
    }
    return out.str();
}

namespace {

json task_metrics_json(const TaskMetrics& tm) {
    return json{{"accuracy", tm.accuracy},
                {"precision", tm.precision},
                {"recall", tm.recall},
                {"f1", tm.f1},
                {"tp", tm.tp},
                {"fp", tm.fp},
                {"fn", tm.fn},
                {"tn", tm.tn}};
}

}  // namespace

std::string CvReport::to_json_string(const std::string& config_hash) const {
    json root;
    root["config_hash"] = config_hash;
    root["k"] = k;
    json methods_json = json::array();
    static const char* kMetrics[4] = {"accuracy", "precision", "recall", "f1"};
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        json mj;
        mj["name"] = method_name(methods[mi]);
        json folds = json::array();
        for (std::size_t f = 0; f < per_fold[mi].size(); ++f) {
            json fj;
            fj["fold"] = f;
            for (std::size_t ti = 0; ti < per_fold[mi][f].tasks.size(); ++ti)
                fj["tasks"][task_name(per_fold[mi][f].tasks[ti])] =
                    task_metrics_json(per_fold[mi][f].per_task[ti]);
            folds.push_back(std::move(fj));
        }
        mj["folds"] = std::move(folds);
        for (Task t : per_fold[mi][0].tasks)
            for (const char* metric : kMetrics) {
                mj["aggregate"][task_name(t)][metric] = {
                    {"mean", mean_metric(methods[mi], t, metric)},
                    {"std", std_metric(methods[mi], t, metric)}};
            }
        methods_json.push_back(std::move(mj));
    }
    root["methods"] = std::move(methods_json);
    return root.dump(2) + "\n";
}

std::string metrics_to_csv(const Metrics& m, const std::string& config_hash) {
    std::ostringstream out;
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "task,accuracy,precision,recall,f1,tp,fp,fn,tn\n";
    for (std::size_t i = 0; i < m.tasks.size(); ++i) {
        const TaskMetrics& tm = m.per_task[i];
        out << task_name(m.tasks[i]) << ',' << fmt(tm.accuracy) << ',' << fmt(tm.precision) << ','
            << fmt(tm.recall) << ',' << fmt(tm.f1) << ',' << tm.tp << ',' << tm.fp << ',' << tm.fn
            << ',' << tm.tn << '\n';
    }
    return out.str();
}

std::string metrics_to_json_string(const Metrics& m, const std::string& config_hash) {
    json root;
    root["config_hash"] = config_hash;
    for (std::size_t i = 0; i < m.tasks.size(); ++i)
        root["tasks"][task_name(m.tasks[i])] = task_metrics_json(m.per_task[i]);
    return root.dump(2) + "\n";
}

}  // namespace edulstm
