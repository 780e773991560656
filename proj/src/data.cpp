#include "edulstm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <tuple>
#include <unordered_map>

#include "edulstm/errors.hpp"
#include "edulstm/rng.hpp"

namespace fs = std::filesystem;

namespace edulstm {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::int64_t parse_int64(const std::string& s, const std::string& file, std::size_t line_no,
                         const char* field) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(file + ":" + std::to_string(line_no) + ": field '" + field +
                        "' is not an integer: '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line_no,
                    const char* field) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(file + ":" + std::to_string(line_no) + ": field '" + field +
                        "' is not a number: '" + s + "'");
    }
}

// Reads a CSV line by line, skipping blanks and '#' comments; calls
// on_row(fields, line_no) for every data row after checking the header.
void read_csv(const std::string& path, const std::vector<std::string>& expected_header,
              const std::function<void(const std::vector<std::string>&, std::size_t)>& on_row) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields != expected_header) {
                std::string want;
                for (std::size_t i = 0; i < expected_header.size(); ++i)
                    want += (i ? "," : "") + expected_header[i];
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": missing or wrong header, expected '" + want + "'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != expected_header.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        on_row(fields, line_no);
    }
    // A file with no rows at all (or only comments) is vacuous input.
}

std::unordered_map<std::string, std::string> load_questions(const std::string& path) {
    std::unordered_map<std::string, std::string> answers;
    read_csv(path, {"question_id", "correct_answer"},
             [&](const std::vector<std::string>& f, std::size_t) { answers[f[0]] = f[1]; });
    return answers;
}

struct RecordBuilder {
    std::vector<StudentRecord> records;
    std::unordered_map<std::string, std::size_t> index;
    std::unordered_map<std::string, std::set<std::pair<std::int64_t, std::string>>> seen;

    void add(const std::string& student_id, InteractionEvent ev, LoadStats* stats) {
        auto key = std::make_pair(ev.timestamp_ms, ev.question_id);
        auto& keys = seen[student_id];
        if (!keys.insert(key).second) {
            if (stats) ++stats->duplicate_row_warnings;
            return;
        }
        auto it = index.find(student_id);
        if (it == index.end()) {
            index.emplace(student_id, records.size());
            records.push_back(StudentRecord{student_id, {}, {}});
            it = index.find(student_id);
        }
        records[it->second].events.push_back(std::move(ev));
    }
};

InteractionEvent make_event(std::int64_t ts, const std::string& qid, const std::string& answer,
                            std::int64_t elapsed,
                            const std::unordered_map<std::string, std::string>& answers,
                            const std::string& file, std::size_t line_no, LoadStats* stats) {
    if (elapsed < 0)
        throw DataError(file + ":" + std::to_string(line_no) + ": negative elapsed_time");
    InteractionEvent ev;
    ev.timestamp_ms = ts;
    ev.question_id = qid;
    ev.user_answer = answer;
    ev.elapsed_ms = elapsed;
    auto it = answers.find(qid);
    if (it == answers.end()) {
        ev.correct = false;
        if (stats) ++stats->unknown_question_warnings;
    } else {
        ev.correct = (answer == it->second);
    }
    return ev;
}

}  // namespace

std::vector<StudentRecord> load_events(const std::string& events_path,
                                       const std::string& questions_path, LoadStats* stats) {
    const auto answers = load_questions(questions_path);
    RecordBuilder builder;

    if (fs::is_directory(events_path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(events_path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const std::string student_id = file.stem().string();
            read_csv(file.string(),
                     {"timestamp", "solving_id", "question_id", "user_answer", "elapsed_time"},
                     [&](const std::vector<std::string>& f, std::size_t line_no) {
                         auto ev = make_event(
                             parse_int64(f[0], file.string(), line_no, "timestamp"), f[2], f[3],
                             parse_int64(f[4], file.string(), line_no, "elapsed_time"), answers,
                             file.string(), line_no, stats);
                         builder.add(student_id, std::move(ev), stats);
                     });
        }
    } else {
        read_csv(events_path,
                 {"student_id", "timestamp", "question_id", "user_answer", "elapsed_time"},
                 [&](const std::vector<std::string>& f, std::size_t line_no) {
                     auto ev = make_event(parse_int64(f[1], events_path, line_no, "timestamp"),
                                          f[2], f[3],
                                          parse_int64(f[4], events_path, line_no, "elapsed_time"),
                                          answers, events_path, line_no, stats);
                     builder.add(f[0], std::move(ev), stats);
                 });
    }
    return std::move(builder.records);
}

void load_static_features(const std::string& path, std::vector<StudentRecord>& records) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t width = 0;
    std::unordered_map<std::string, Vector> features;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields.empty() || fields[0] != "student_id" || fields.size() < 2)
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected header 'student_id,f1,...'");
            width = fields.size() - 1;
            header_seen = true;
            continue;
        }
        if (fields.size() != width + 1)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(width + 1) + " fields, got " +
                            std::to_string(fields.size()));
        Vector z(width);
        for (std::size_t i = 0; i < width; ++i)
            z[i] = parse_double(fields[i + 1], path, line_no, "feature");
        features[fields[0]] = std::move(z);
    }
    for (auto& rec : records) {
        auto it = features.find(rec.student_id);
        if (it == features.end())
            throw DataError(path + ": no static features for student '" + rec.student_id + "'");
        rec.static_features = it->second;
    }
}

std::vector<StudentRecord> clean(std::vector<StudentRecord> records, std::size_t min_len) {
    for (auto& rec : records) {
        auto& ev = rec.events;
        std::sort(ev.begin(), ev.end(), [](const InteractionEvent& a, const InteractionEvent& b) {
            return std::tie(a.timestamp_ms, a.question_id, a.user_answer, a.elapsed_ms) <
                   std::tie(b.timestamp_ms, b.question_id, b.user_answer, b.elapsed_ms);
        });
        ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
        // Equal timestamps cannot be ordered; keep the first event of each tie.
        ev.erase(std::unique(ev.begin(), ev.end(),
                             [](const InteractionEvent& a, const InteractionEvent& b) {
                                 return a.timestamp_ms == b.timestamp_ms;
                             }),
                 ev.end());
    }

    std::vector<std::int64_t> elapsed;
    for (const auto& rec : records)
        for (const auto& ev : rec.events) elapsed.push_back(ev.elapsed_ms);
    if (!elapsed.empty()) {
        std::sort(elapsed.begin(), elapsed.end());
        const std::size_t rank =
            static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(elapsed.size())));
        const std::int64_t cap = elapsed[std::max<std::size_t>(rank, 1) - 1];
        for (auto& rec : records)
            for (auto& ev : rec.events) ev.elapsed_ms = std::min(ev.elapsed_ms, cap);
    }

    std::vector<StudentRecord> kept;
    kept.reserve(records.size());
    for (auto& rec : records)
        if (rec.events.size() >= min_len) kept.push_back(std::move(rec));
    return kept;
}

std::size_t question_bucket(const std::string& question_id, std::size_t buckets) {
    return static_cast<std::size_t>(splitmix64(fnv1a64(question_id)) % buckets);
}

double question_sign(const std::string& question_id) {
    return (splitmix64(fnv1a64(question_id)) >> 63) ? 1.0 : -1.0;
}

EncodingConfig EncodingConfig::fit(const std::vector<StudentRecord>& train_records,
                                   std::size_t hash_buckets) {
    if (hash_buckets < 1) throw ConfigError("hash_buckets must be >= 1");
    EncodingConfig enc;
    enc.hash_buckets = hash_buckets;
    enc.static_dim = train_records.empty() ? 0 : train_records[0].static_features.size();
    for (const auto& rec : train_records)
        if (rec.static_features.size() != enc.static_dim)
            throw ShapeError("static feature width differs across students (" +
                             std::to_string(rec.static_features.size()) + " vs " +
                             std::to_string(enc.static_dim) + ")");

    // Population mean/std; std floors at 1 when the feature is constant.
    double e_sum = 0, e_sq = 0, g_sum = 0, g_sq = 0;
    std::size_t e_n = 0, g_n = 0;
    for (const auto& rec : train_records) {
        for (std::size_t i = 0; i < rec.events.size(); ++i) {
            const double e = static_cast<double>(rec.events[i].elapsed_ms);
            e_sum += e;
            e_sq += e * e;
            ++e_n;
            if (i > 0) {
                const double g = std::log1p(
                    static_cast<double>(rec.events[i].timestamp_ms - rec.events[i - 1].timestamp_ms));
                g_sum += g;
                g_sq += g * g;
                ++g_n;
            }
        }
    }
    auto finish = [](double sum, double sq, std::size_t n, double& mean, double& std_out) {
        if (n == 0) return;
        mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
        std_out = var > 1e-24 ? std::sqrt(var) : 1.0;
    };
    finish(e_sum, e_sq, e_n, enc.elapsed_mean, enc.elapsed_std);
    finish(g_sum, g_sq, g_n, enc.loggap_mean, enc.loggap_std);
    return enc;
}

EncodedSequence encode(const StudentRecord& record, const EncodingConfig& enc) {
    if (record.events.size() < 2)
        throw DataError("encode: record '" + record.student_id + "' has fewer than 2 events");
    if (record.static_features.size() != enc.static_dim)
        throw ShapeError("encode: record '" + record.student_id + "' static width " +
                         std::to_string(record.static_features.size()) + ", encoder expects " +
                         std::to_string(enc.static_dim));

    const auto& ev = record.events;
    EncodedSequence seq;
    seq.student_id = record.student_id;
    seq.z = record.static_features;
    seq.xs.reserve(ev.size());
    for (std::size_t t = 0; t < ev.size(); ++t) {
        Vector x(enc.feature_dim(), 0.0);
        x[0] = (t > 0 && ev[t - 1].correct) ? 1.0 : 0.0;
        x[1] = (static_cast<double>(ev[t].elapsed_ms) - enc.elapsed_mean) / enc.elapsed_std;
        const double raw_gap =
            t > 0 ? std::log1p(static_cast<double>(ev[t].timestamp_ms - ev[t - 1].timestamp_ms))
                  : 0.0;
        x[2] = (raw_gap - enc.loggap_mean) / enc.loggap_std;
        x[3 + question_bucket(ev[t].question_id, enc.hash_buckets)] =
            question_sign(ev[t].question_id);
        seq.xs.push_back(std::move(x));
    }
    seq.next_correct.reserve(ev.size() - 1);
    for (std::size_t t = 1; t < ev.size(); ++t)
        seq.next_correct.push_back(ev[t].correct ? 1.0 : 0.0);

    const Labels lab = derive_labels(record);
    seq.grade = lab.grade;
    seq.engagement = lab.engagement;
    seq.risk = lab.risk;
    return seq;
}

Labels derive_labels(const StudentRecord& record) {
    const auto& ev = record.events;
    Labels lab;
    if (ev.empty()) return lab;

    std::size_t n_correct = 0;
    std::set<std::int64_t> days;
    for (const auto& e : ev) {
        if (e.correct) ++n_correct;
        days.insert(e.timestamp_ms / kMsPerDay);
    }
    lab.grade = static_cast<double>(n_correct) / static_cast<double>(ev.size());

    const std::int64_t span = ev.back().timestamp_ms / kMsPerDay - ev.front().timestamp_ms / kMsPerDay + 1;
    lab.engagement = std::min(1.0, static_cast<double>(days.size()) / static_cast<double>(span));

    const std::size_t tail = (ev.size() + 4) / 5;  // ceil(n/5), at least 1
    std::size_t tail_correct = 0;
    for (std::size_t i = ev.size() - tail; i < ev.size(); ++i)
        if (ev[i].correct) ++tail_correct;
    const double tail_rate = static_cast<double>(tail_correct) / static_cast<double>(tail);
    lab.risk = tail_rate < 0.5 ? 1.0 : 0.0;
    return lab;
}

void FoldPlan::validate(std::size_t n_students) const {
    if (k < 2) throw ConfigError("fold plan: k must be >= 2");
    if (assignment.size() != n_students)
        throw ConfigError("fold plan: covers " + std::to_string(assignment.size()) +
                          " students, dataset has " + std::to_string(n_students));
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [id, fold] : assignment) {
        if (fold < 0 || fold >= k)
            throw ConfigError("fold plan: student '" + id + "' assigned to fold " +
                              std::to_string(fold));
        ++sizes[static_cast<std::size_t>(fold)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*hi - *lo > 1) throw ConfigError("fold plan: fold sizes differ by more than 1");
}

FoldPlan kfold_split(const std::vector<StudentRecord>& records, int k, std::uint64_t seed,
                     bool stratify_by_risk) {
    if (k < 2) throw ConfigError("kfold_split: k must be >= 2");
    if (records.size() < static_cast<std::size_t>(k))
        throw ConfigError("kfold_split: " + std::to_string(records.size()) +
                          " students is fewer than k=" + std::to_string(k));

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(splitmix64(seed));
    shuffle_deterministic(order, rng);

    FoldPlan plan;
    plan.k = k;
    int next_fold = 0;
    auto deal = [&](const std::vector<std::size_t>& idxs) {
        for (std::size_t idx : idxs) {
            plan.assignment[records[idx].student_id] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    };
    if (stratify_by_risk) {
        std::vector<std::size_t> risky, rest;
        for (std::size_t idx : order)
            (derive_labels(records[idx]).risk > 0.5 ? risky : rest).push_back(idx);
        deal(risky);
        deal(rest);  // the deal counter carries over, keeping global balance
    } else {
        deal(order);
    }
    return plan;
}

void SyntheticSpec::validate() const {
    if (n_students == 0) throw ConfigError("synthetic: n_students must be > 0");
    if (n_questions == 0) throw ConfigError("synthetic: n_questions must be > 0");
    if (seq_len_min < 2 || seq_len_min > seq_len_max)
        throw ConfigError("synthetic: need 2 <= seq_len_min <= seq_len_max");
    if (fatigue < 0.0 || fatigue > 1.0) throw ConfigError("synthetic: fatigue must be in [0, 1]");
}

SyntheticDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    static const char* kTokens[4] = {"a", "b", "c", "d"};

    SyntheticDataset data;
    std::mt19937_64 qrng(mix_seed(seed, 0));
    data.questions.reserve(spec.n_questions);
    for (std::size_t q = 0; q < spec.n_questions; ++q) {
        SyntheticQuestion sq;
        sq.question_id = "q" + std::to_string(q);
        // Difficulties sit below the skill range so the pre-fatigue success
        // rate lands above one half; fatigue then pulls the overall rate
        // back toward it.
        sq.difficulty = uniform_in(qrng, 0.05, 0.70);
        sq.correct_answer = kTokens[qrng() % 4];
        data.questions.push_back(std::move(sq));
    }

    data.records.reserve(spec.n_students);
    for (std::size_t s = 0; s < spec.n_students; ++s) {
        std::mt19937_64 rng(mix_seed(seed, 1, s));
        StudentRecord rec;
        rec.student_id = "s" + std::to_string(s);
        const double skill = uniform_in(rng, 0.2, 0.9);
        data.skills.push_back(skill);
        rec.static_features = {skill + 0.02 * gaussian(rng)};

        const std::size_t len =
            spec.seq_len_min + (spec.seq_len_max > spec.seq_len_min
                                    ? rng() % (spec.seq_len_max - spec.seq_len_min + 1)
                                    : 0);
        std::int64_t ts = 1'600'000'000'000LL + static_cast<std::int64_t>(rng() % 30) * kMsPerDay +
                          static_cast<std::int64_t>(rng() % kMsPerDay);
        std::size_t streak = 0;
        rec.events.reserve(len);
        for (std::size_t j = 0; j < len; ++j) {
            const auto& q = data.questions[rng() % spec.n_questions];
            double p = sigmoid(spec.discrimination * (skill - q.difficulty));
            if (spec.burst > 0 && streak >= spec.burst) p = std::max(0.0, p - spec.fatigue);
            const bool correct = uniform01(rng) < p;

            InteractionEvent ev;
            ev.timestamp_ms = ts;
            ev.question_id = q.question_id;
            if (correct) {
                ev.user_answer = q.correct_answer;
            } else {
                std::string wrong = kTokens[rng() % 4];
                if (wrong == q.correct_answer) wrong = kTokens[(fnv1a64(wrong) + 1) % 4];
                ev.user_answer = wrong;
            }
            ev.elapsed_ms = static_cast<std::int64_t>(uniform_in(rng, 2000.0, 60000.0));
            ev.correct = correct;
            rec.events.push_back(std::move(ev));

            if (uniform01(rng) < 0.15) {
                ts += static_cast<std::int64_t>(uniform_in(rng, 2.0 * 3600e3, 8.0 * 3600e3));
                streak = 0;  // a long break resets the fatigue streak
            } else {
                ts += static_cast<std::int64_t>(uniform_in(rng, 5000.0, 60000.0));
                streak += 1;
            }
        }
        data.records.push_back(std::move(rec));
    }
    return data;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

void write_dataset(const SyntheticDataset& data, const std::string& dir,
                   const std::string& header_comment) {
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw DataError("cannot write file: " + (fs::path(dir) / name).string());
        if (!header_comment.empty()) out << "# " << header_comment << "\n";
        return out;
    };

    auto events = open("events.csv");
    events << "student_id,timestamp,question_id,user_answer,elapsed_time\n";
    for (const auto& rec : data.records)
        for (const auto& ev : rec.events)
            events << rec.student_id << ',' << ev.timestamp_ms << ',' << ev.question_id << ','
                   << ev.user_answer << ',' << ev.elapsed_ms << '\n';

    auto questions = open("questions.csv");
    questions << "question_id,correct_answer\n";
    for (const auto& q : data.questions)
        questions << q.question_id << ',' << q.correct_answer << '\n';

    auto statics = open("static_features.csv");
    statics << "student_id,f1\n";
    for (const auto& rec : data.records) {
        statics << rec.student_id;
        for (double f : rec.static_features) statics << ',' << format_double(f);
        statics << '\n';
    }
}

}  // namespace edulstm
