#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edulstm/data.hpp"
#include "edulstm/model.hpp"
#include "edulstm/optim.hpp"

namespace edulstm {

enum class OptimizerKind { Sgd, Adam };
enum class ScheduleUnit { Epoch, Batch };

struct TrainConfig {
    int epochs = 50;
    std::size_t batch_size = 32;
    OptimizerKind optimizer = OptimizerKind::Adam;
    ScheduleSpec schedule;              // defaults to constant 0.001
    ScheduleUnit schedule_unit = ScheduleUnit::Epoch;
    double dropout_rate = 0.5;
    Vector loss_weights;                // aligned with model tasks; empty = all ones
    double clip_norm = 5.0;             // <= 0 disables clipping
    std::uint64_t seed = 42;
    double threshold = 0.5;             // decision threshold for binarization
    bool parallel_batch = false;        // OpenMP over sequences within a batch

    void validate() const;
};

struct TaskMetrics {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

    bool operator==(const TaskMetrics& o) const = default;
};

// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2pr/(p+r),
// accuracy = (tp+tn)/total; any rate with a zero denominator is reported
// as 0 (the raw counts stay available for other conventions).
TaskMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                std::uint64_t tn);

struct Metrics {
    std::vector<Task> tasks;
    std::vector<TaskMetrics> per_task;

    const TaskMetrics& for_task(Task t) const;
    bool operator==(const Metrics& o) const = default;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;

    bool operator==(const EpochLog& o) const = default;
};

struct TrainResult {
    FusedLstmParams params;
    std::vector<EpochLog> epoch_logs;
    std::uint64_t init_seed = 0;
};

// Mean gradient over a set of sequences, with the loss averaged the same
// way. Dropout is seeded per (seed_root, sequence id), so the result is
// independent of batch partitioning and, with `parallel`, bitwise equal to
// the serial path (per-sequence gradients are reduced in index order).
struct BatchGradient {
    Gradients grad;
    double mean_loss = 0.0;
};
BatchGradient batch_gradients(const ModelConfig& cfg, const FusedLstmParams& params,
                              const std::vector<EncodedSequence>& seqs,
                              const std::vector<std::size_t>& batch_indices,
                              const Vector& task_weights, double dropout_rate,
                              std::uint64_t dropout_seed_root, bool parallel);

TaskTargets targets_for(const ModelConfig& cfg, const EncodedSequence& seq);

// One optimizer step per batch; students are reshuffled every epoch with the
// seeded rng. Aborts with a TrainError naming the epoch and batch if the
// loss stops being finite.
TrainResult train(const std::vector<StudentRecord>& records, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const EncodingConfig& enc);

// Inference-mode evaluation. next_correct is scored per interaction (the
// prediction at timestep t against the correctness of event t+1); grade,
// engagement and risk are scored per student with labels binarized at 0.5.
// Predictions are positive when >= threshold.
Metrics evaluate(const FusedLstmParams& params, const ModelConfig& model_cfg,
                 const std::vector<StudentRecord>& records, const EncodingConfig& enc,
                 double threshold);

enum class Method { FusedLstm, Majority, Logreg, KnnEuclidean, KnnDtw };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

// Baselines score the same per-interaction next_correct population as the
// LSTM: for each student, predictions at events 1..n-1 for the correctness
// of events 2..n.
Metrics baseline_majority(const std::vector<StudentRecord>& train,
                          const std::vector<StudentRecord>& test);
Metrics baseline_logreg(const std::vector<StudentRecord>& train,
                        const std::vector<StudentRecord>& test, double lr, std::size_t iters);

enum class KnnDistance { EuclideanAggregate, Dtw };
Metrics baseline_knn(const std::vector<StudentRecord>& train,
                     const std::vector<StudentRecord>& test, std::size_t k, KnnDistance distance);

// Plain full-batch logistic regression, exposed for the baselines.
struct LogRegModel {
    Vector w;
    double b = 0.0;

    double predict(const Vector& x) const;
};
LogRegModel logreg_fit(const std::vector<Vector>& xs, const Vector& ys, double lr,
                       std::size_t iters);

// Classical dynamic-programming alignment cost:
// D[i,j] = |a_i - b_j| + min(D[i-1,j], D[i,j-1], D[i-1,j-1]).
double dtw_distance(const Vector& a, const Vector& b);

struct AggregateStats {
    std::vector<double> mean;
    std::vector<double> std_dev;  // sample standard deviation across folds
};

struct CvReport {
    int k = 0;
    std::vector<Method> methods;
    // per_fold[m][f] is the Metrics of methods[m] on fold f.
    std::vector<std::vector<Metrics>> per_fold;

    double mean_metric(Method m, Task t, const std::string& metric) const;
    double std_metric(Method m, Task t, const std::string& metric) const;
    std::string to_csv(const std::string& config_hash) const;
    std::string to_json_string(const std::string& config_hash) const;

    bool operator==(const CvReport& o) const = default;
};

// Trains every method on the K-1 complement of each fold and evaluates on
// the held-out fold. Folds are independent; parallel_folds > 1 runs them
// concurrently with results identical to the sequential order.
CvReport cross_validate(const std::vector<StudentRecord>& records, const FoldPlan& plan,
                        const TrainConfig& cfg, const ModelConfig& model_cfg_base,
                        std::size_t hash_buckets, const std::vector<Method>& methods,
                        int parallel_folds = 1);

std::string metrics_to_csv(const Metrics& m, const std::string& config_hash);
std::string metrics_to_json_string(const Metrics& m, const std::string& config_hash);

}  // namespace edulstm
