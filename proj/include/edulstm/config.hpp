#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edulstm/data.hpp"
#include "edulstm/model.hpp"
#include "edulstm/train_eval.hpp"

namespace edulstm {

enum class ReportFormat { Csv, Json, Both };

struct DataPaths {
    std::string events;
    std::string questions;
    std::string static_features;  // optional, empty = unfused
};

struct CvSettings {
    int k = 5;
    bool stratify_by_risk = true;
    std::vector<Method> methods = {Method::FusedLstm, Method::Majority, Method::Logreg,
                                   Method::KnnEuclidean, Method::KnnDtw};
    std::uint64_t seed = 7;
};

enum class Command { Synth, Train, Eval, Crossval, Predict };

// One JSON config drives every subcommand; CLI flags override the
// corresponding keys. Exactly one of data/synthetic must be present.
struct RunConfig {
    int version = 1;
    std::optional<DataPaths> data;
    std::optional<SyntheticSpec> synthetic;

    std::size_t hidden_dim = 128;
    std::vector<Task> tasks = {Task::NextCorrect, Task::Grade, Task::Engagement, Task::Risk};
    double dropout_rate = 0.5;
    bool fuse_forget_gate = true;
    std::size_t hash_buckets = 64;

    TrainConfig train;
    std::size_t min_len = 5;

    CvSettings cv;

    std::string out_dir = "out";
    ReportFormat format = ReportFormat::Both;
    int parallel_folds = 1;

    // FNV-1a over the canonical JSON of the pipeline-relevant keys (data,
    // synthetic, model, train, cv). Execution-only settings (out_dir,
    // format, parallel_folds) are excluded so they cannot change report
    // bytes.
    std::string config_hash() const;

    // Full validation for the given command; performs no side effects.
    void validate_for(Command cmd) const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Loaded records for the configured source: either the CSV files or an
// in-memory synthetic dataset, cleaned with min_len.
std::vector<StudentRecord> load_records(const RunConfig& cfg);

}  // namespace edulstm
