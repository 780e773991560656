#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edulstm/linalg.hpp"

namespace edulstm {

struct InteractionEvent {
    std::int64_t timestamp_ms = 0;
    std::string question_id;
    std::string user_answer;
    std::int64_t elapsed_ms = 0;  // >= 0
    bool correct = false;

    bool operator==(const InteractionEvent& o) const = default;
};

struct StudentRecord {
    std::string student_id;
    std::vector<InteractionEvent> events;  // time-ordered after clean()
    Vector static_features;

    bool operator==(const StudentRecord& o) const = default;
};

struct LoadStats {
    std::size_t unknown_question_warnings = 0;
    std::size_t duplicate_row_warnings = 0;
};

// Events: either a flat CSV with header
//   student_id,timestamp,question_id,user_answer,elapsed_time
// or a directory of per-student CSVs in the native KT1 layout
//   timestamp,solving_id,question_id,user_answer,elapsed_time
// with the student id taken from the file name. Questions: CSV with header
//   question_id,correct_answer
// Lines starting with '#' are skipped. correct = (user_answer equals the
// question's correct_answer); unknown question ids yield correct=false and a
// counted warning. Duplicate (timestamp, question_id) rows per student are
// dropped with a counted warning.
std::vector<StudentRecord> load_events(const std::string& events_path,
                                       const std::string& questions_path,
                                       LoadStats* stats = nullptr);

// Joins `student_id,f1,f2,...` rows onto records by id. Every record must be
// covered; extra rows are ignored.
void load_static_features(const std::string& path, std::vector<StudentRecord>& records);

// Sorts each record by time, removes duplicates, drops events sharing a
// timestamp with an earlier one (keeping the first) so timestamps end up
// strictly increasing, caps elapsed_time at the dataset's 99th percentile
// (nearest-rank), and drops records shorter than min_len. Idempotent.
std::vector<StudentRecord> clean(std::vector<StudentRecord> records, std::size_t min_len);

struct EncodingConfig {
    std::size_t hash_buckets = 64;
    std::size_t static_dim = 0;
    double elapsed_mean = 0.0;
    double elapsed_std = 1.0;
    double loggap_mean = 0.0;
    double loggap_std = 1.0;

    // Normalization statistics from the given (training) records only.
    static EncodingConfig fit(const std::vector<StudentRecord>& train_records,
                              std::size_t hash_buckets);

    // [prev_correct, elapsed, log-gap, hash block]
    std::size_t feature_dim() const { return 3 + hash_buckets; }
};

// Signed hashing of a question id into the bucket block: one entry set to
// +/-1, the rest zero. Distinct ids collide (identical vectors) with
// probability about 1/(2B); colliding ids are simply indistinguishable to
// the model.
std::size_t question_bucket(const std::string& question_id, std::size_t buckets);
double question_sign(const std::string& question_id);

struct EncodedSequence {
    std::string student_id;
    std::vector<Vector> xs;  // per-timestep features, all feature_dim() wide
    Vector z;                // static features (may be empty)
    Vector next_correct;     // 0/1 labels; entry t is the correctness of event t+1
    double grade = 0.0;      // fraction of correct answers
    double engagement = 0.0; // active days / span days, capped at 1
    double risk = 0.0;       // 1 when the final-20% correctness rate < 0.5
};

// x_t = [prev_correct, (elapsed - mean)/std, (log1p(gap) - mean)/std,
// signed question hash]; the first timestep uses prev_correct = 0 and raw
// gap 0. Requires a cleaned record of length >= 2.
EncodedSequence encode(const StudentRecord& record, const EncodingConfig& enc);

struct Labels {
    double grade = 0.0;
    double engagement = 0.0;
    double risk = 0.0;
};

Labels derive_labels(const StudentRecord& record);

struct FoldPlan {
    int k = 0;
    std::map<std::string, int> assignment;  // student_id -> fold in [0, k)

    void validate(std::size_t n_students) const;
};

// Students are shuffled by the seeded rng and dealt round-robin; with
// stratification the deal continues across strata so fold sizes stay within
// one of each other globally.
FoldPlan kfold_split(const std::vector<StudentRecord>& records, int k, std::uint64_t seed,
                     bool stratify_by_risk);

struct SyntheticSpec {
    std::size_t n_students = 0;
    std::size_t seq_len_min = 0;
    std::size_t seq_len_max = 0;
    std::size_t n_questions = 0;
    double discrimination = 6.0;  // slope of the skill-difficulty response
    double fatigue = 0.0;         // correctness probability drop once a streak exceeds burst
    std::size_t burst = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticQuestion {
    std::string question_id;
    std::string correct_answer;
    double difficulty = 0.0;
};

struct SyntheticDataset {
    std::vector<StudentRecord> records;
    std::vector<SyntheticQuestion> questions;
    std::vector<double> skills;  // latent skill per student, same order as records
};

// Each student gets a latent skill ~ U(0.2, 0.9), mirrored (plus small
// noise) into their single static feature; answers are Bernoulli with
// p = sigmoid(a * (skill - difficulty)), reduced by `fatigue` once the
// student has answered more than `burst` questions without a long break.
SyntheticDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Writes events.csv / questions.csv / static_features.csv in the formats
// load_events understands; header_comment (when nonempty) is emitted as a
// leading '#' line in each file.
void write_dataset(const SyntheticDataset& data, const std::string& dir,
                   const std::string& header_comment);

}  // namespace edulstm
