#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "edulstm/data.hpp"
#include "edulstm/errors.hpp"
#include "edulstm/rng.hpp"

using namespace edulstm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("edulstm_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    fs::path file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p;
    }
};

InteractionEvent ev(std::int64_t ts, const std::string& qid, bool correct,
                    std::int64_t elapsed = 1000) {
    InteractionEvent e;
    e.timestamp_ms = ts;
    e.question_id = qid;
    e.user_answer = correct ? "a" : "b";
    e.elapsed_ms = elapsed;
    e.correct = correct;
    return e;
}

StudentRecord record_of(const std::string& id, std::vector<InteractionEvent> events) {
    StudentRecord r;
    r.student_id = id;
    r.events = std::move(events);
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) { ma += ra[i]; mb += rb[i]; }
    ma /= n; mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("load_events joins correctness and counts warnings") {
    TempDir dir("load");
    const auto questions = dir.file("questions.csv",
                                    "question_id,correct_answer\n"
                                    "q1,a\n"
                                    "q2,c\n");
    const auto events = dir.file("events.csv",
                                 "# config_hash=deadbeef\n"
                                 "student_id,timestamp,question_id,user_answer,elapsed_time\n"
                                 "s1,1000,q1,a,500\n"
                                 "s1,2000,q2,c,600\n"
                                 "s1,3000,q2,b,700\n");
    LoadStats stats;
    const auto records = load_events(events.string(), questions.string(), &stats);
    REQUIRE(records.size() == 1);
    REQUIRE(records[0].events.size() == 3);
    CHECK(records[0].student_id == "s1");
    CHECK(records[0].events[0].correct);
    CHECK(records[0].events[1].correct);
    CHECK_FALSE(records[0].events[2].correct);
    CHECK(stats.unknown_question_warnings == 0);
    CHECK(stats.duplicate_row_warnings == 0);
}

TEST_CASE("load_events: duplicates, unknown questions, empty file") {
    TempDir dir("load2");
    const auto questions = dir.file("questions.csv", "question_id,correct_answer\nq1,a\n");
    const auto events = dir.file("events.csv",
                                 "student_id,timestamp,question_id,user_answer,elapsed_time\n"
                                 "s1,1000,q1,a,500\n"
                                 "s1,1000,q1,a,500\n"
                                 "s1,2000,qX,a,100\n");
    LoadStats stats;
    const auto records = load_events(events.string(), questions.string(), &stats);
    REQUIRE(records.size() == 1);
    CHECK(records[0].events.size() == 2);  // duplicate row dropped
    CHECK(stats.duplicate_row_warnings == 1);
    CHECK(stats.unknown_question_warnings == 1);
    CHECK_FALSE(records[0].events[1].correct);  // unknown question scores false

    const auto empty = dir.file("empty.csv", "");
    CHECK(load_events(empty.string(), questions.string()).empty());
}

TEST_CASE("load_events error reporting") {
    TempDir dir("load3");
    const auto questions = dir.file("questions.csv", "question_id,correct_answer\nq1,a\n");

    const auto bad_row = dir.file("bad_row.csv",
                                  "student_id,timestamp,question_id,user_answer,elapsed_time\n"
                                  "s1,notanumber,q1,a,500\n");
    CHECK_THROWS_WITH_AS(load_events(bad_row.string(), questions.string()),
                         doctest::Contains(":2:"), DataError);

    const auto short_row = dir.file("short_row.csv",
                                    "student_id,timestamp,question_id,user_answer,elapsed_time\n"
                                    "s1,1000,q1\n");
    CHECK_THROWS_WITH_AS(load_events(short_row.string(), questions.string()),
                         doctest::Contains("expected 5 fields"), DataError);

    const auto bad_header = dir.file("bad_header.csv", "foo,bar\n1,2\n");
    CHECK_THROWS_WITH_AS(load_events(bad_header.string(), questions.string()),
                         doctest::Contains("header"), DataError);

    CHECK_THROWS_AS(load_events((dir.path / "missing.csv").string(), questions.string()),
                    DataError);
}

TEST_CASE("load_events reads a directory of native per-student files") {
    TempDir dir("load4");
    const auto questions = dir.file("questions.csv", "question_id,correct_answer\nq1,a\nq2,b\n");
    fs::create_directories(dir.path / "users");
    {
        std::ofstream u1(dir.path / "users" / "u100.csv");
        u1 << "timestamp,solving_id,question_id,user_answer,elapsed_time\n";
        u1 << "1000,1,q1,a,300\n2000,2,q2,c,400\n";
        std::ofstream u2(dir.path / "users" / "u200.csv");
        u2 << "timestamp,solving_id,question_id,user_answer,elapsed_time\n";
        u2 << "1500,1,q2,b,350\n";
    }
    const auto records = load_events((dir.path / "users").string(), questions.string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].student_id == "u100");
    CHECK(records[0].events.size() == 2);
    CHECK(records[0].events[0].correct);
    CHECK_FALSE(records[0].events[1].correct);
    CHECK(records[1].student_id == "u200");
    CHECK(records[1].events[0].correct);
}

TEST_CASE("load_static_features joins by student id") {
    TempDir dir("static");
    const auto path = dir.file("static.csv", "student_id,f1,f2\ns1,0.5,1.5\ns2,0.25,-1\n");
    std::vector<StudentRecord> records = {record_of("s1", {ev(1, "q", true)}),
                                          record_of("s2", {ev(2, "q", true)})};
    load_static_features(path.string(), records);
    CHECK(records[0].static_features == Vector{0.5, 1.5});
    CHECK(records[1].static_features == Vector{0.25, -1.0});

    std::vector<StudentRecord> missing = {record_of("s3", {ev(1, "q", true)})};
    CHECK_THROWS_WITH_AS(load_static_features(path.string(), missing),
                         doctest::Contains("s3"), DataError);
}

TEST_CASE("clean: sorting, dedup, min_len, idempotence") {
    std::vector<StudentRecord> records;
    records.push_back(record_of("short", {ev(1, "q1", true), ev(2, "q2", true)}));
    records.push_back(record_of("ok", {ev(5000, "q3", false), ev(1000, "q1", true),
                                       ev(3000, "q2", true), ev(3000, "q2", true),
                                       ev(4000, "q9", false)}));

    const auto cleaned = clean(records, 3);
    REQUIRE(cleaned.size() == 1);  // "short" dropped by min_len
    const auto& evs = cleaned[0].events;
    REQUIRE(evs.size() == 4);  // exact duplicate removed
    for (std::size_t i = 1; i < evs.size(); ++i)
        CHECK(evs[i].timestamp_ms > evs[i - 1].timestamp_ms);

    const auto twice = clean(cleaned, 3);
    CHECK(twice == cleaned);
}

TEST_CASE("clean: equal timestamps keep only the first event") {
    auto rec = record_of("s", {ev(1000, "q1", true), ev(1000, "q2", false),
                               ev(2000, "q3", true), ev(3000, "q4", true)});
    const auto cleaned = clean({rec}, 2);
    REQUIRE(cleaned.size() == 1);
    CHECK(cleaned[0].events.size() == 3);
    CHECK(cleaned[0].events[0].question_id == "q1");
}

TEST_CASE("clean caps elapsed_time at the dataset p99") {
    std::vector<StudentRecord> records;
    // 200 events: 199 with elapsed 100, one huge outlier
    std::vector<InteractionEvent> evs;
    for (int i = 0; i < 199; ++i) evs.push_back(ev(1000 * (i + 1), "q", true, 100));
    evs.push_back(ev(1000 * 200, "q", true, 1000000));
    records.push_back(record_of("s", std::move(evs)));

    const auto cleaned = clean(records, 2);
    std::int64_t max_elapsed = 0;
    for (const auto& e : cleaned[0].events) max_elapsed = std::max(max_elapsed, e.elapsed_ms);
    CHECK(max_elapsed == 100);  // nearest-rank p99 of the multiset is 100

    const auto twice = clean(cleaned, 2);
    CHECK(twice == cleaned);
}

TEST_CASE("encode produces the documented layout") {
    auto rec = record_of("s", {ev(1000, "q1", true, 100), ev(61000, "q2", false, 200),
                               ev(121000, "q1", true, 300)});
    rec.static_features = {0.7};
    EncodingConfig enc;
    enc.hash_buckets = 8;
    enc.static_dim = 1;
    enc.elapsed_mean = 200.0;
    enc.elapsed_std = 100.0;
    enc.loggap_mean = 0.0;
    enc.loggap_std = 1.0;

    const EncodedSequence seq = encode(rec, enc);
    REQUIRE(seq.xs.size() == 3);
    CHECK(seq.xs[0].size() == enc.feature_dim());
    CHECK(seq.z == Vector{0.7});

    // first timestep: prev_correct 0, raw gap 0
    CHECK(seq.xs[0][0] == 0.0);
    CHECK(seq.xs[0][1] == doctest::Approx((100.0 - 200.0) / 100.0));
    CHECK(seq.xs[0][2] == doctest::Approx(0.0));
    // later timesteps carry the previous event's correctness
    CHECK(seq.xs[1][0] == 1.0);
    CHECK(seq.xs[2][0] == 0.0);
    CHECK(seq.xs[1][2] == doctest::Approx(std::log1p(60000.0)));

    // exactly one nonzero entry of magnitude 1 in each hash block
    for (const auto& x : seq.xs) {
        int nonzero = 0;
        for (std::size_t j = 3; j < x.size(); ++j)
            if (x[j] != 0.0) {
                ++nonzero;
                CHECK(std::abs(x[j]) == 1.0);
            }
        CHECK(nonzero == 1);
    }
    // same question id hits the same bucket with the same sign
    CHECK(std::equal(seq.xs[0].begin() + 3, seq.xs[0].end(), seq.xs[2].begin() + 3));

    // labels: grade 2/3, one event per day windows
    CHECK(seq.next_correct == Vector{0.0, 1.0});
    CHECK(seq.grade == doctest::Approx(2.0 / 3.0));

    // purity: encoding twice gives identical bits
    const EncodedSequence again = encode(rec, enc);
    CHECK(again.xs == seq.xs);

    // too-short records are rejected
    auto tiny = record_of("t", {ev(1, "q", true)});
    tiny.static_features = {0.0};
    CHECK_THROWS_AS(encode(tiny, enc), DataError);

    // static width mismatch
    rec.static_features = {0.7, 0.1};
    CHECK_THROWS_AS(encode(rec, enc), ShapeError);
}

TEST_CASE("encode with zero static width runs unfused") {
    auto rec = record_of("s", {ev(1000, "q1", true), ev(2000, "q2", false)});
    EncodingConfig enc;
    enc.hash_buckets = 4;
    enc.static_dim = 0;
    const EncodedSequence seq = encode(rec, enc);
    CHECK(seq.z.empty());
}

TEST_CASE("question hashing rarely collides across distinct ids") {
    const std::size_t B = 64;
    std::vector<std::pair<std::size_t, double>> codes;
    for (int i = 0; i < 200; ++i) {
        const std::string qid = "q" + std::to_string(i);
        codes.emplace_back(question_bucket(qid, B), question_sign(qid));
    }
    std::size_t collisions = 0, pairs = 0;
    for (std::size_t i = 0; i < codes.size(); ++i)
        for (std::size_t j = i + 1; j < codes.size(); ++j) {
            ++pairs;
            if (codes[i] == codes[j]) ++collisions;
        }
    // identical vectors need the same bucket and sign: about 1/(2B) of pairs
    CHECK(static_cast<double>(collisions) <= static_cast<double>(pairs) / B);
    for (const auto& [bucket, sign] : codes) {
        CHECK(bucket < B);
        CHECK((sign == 1.0 || sign == -1.0));
    }
}

TEST_CASE("derive_labels") {
    constexpr std::int64_t day = 86'400'000;

    // all correct: grade 1, risk 0
    auto all_good = record_of("s", {ev(1, "a", true), ev(2, "b", true), ev(3, "c", true)});
    Labels lab = derive_labels(all_good);
    CHECK(lab.grade == 1.0);
    CHECK(lab.risk == 0.0);

    // one-day span: engagement 1
    CHECK(lab.engagement == 1.0);

    // two active days out of a four-day span
    auto spread = record_of("s", {ev(100, "a", true), ev(3 * day + 100, "b", true)});
    CHECK(derive_labels(spread).engagement == doctest::Approx(0.5));

    // 10 events, last 2 (ceil(10/5)) both wrong: tail rate 0 < 0.5
    std::vector<InteractionEvent> evs;
    for (int i = 0; i < 8; ++i) evs.push_back(ev(i + 1, "q", true));
    evs.push_back(ev(9, "q", false));
    evs.push_back(ev(10, "q", false));
    CHECK(derive_labels(record_of("s", evs)).risk == 1.0);

    // crafted tail rate 0.4: 10 events, tail = last 2... use 25 events, tail 5, 2 correct
    std::vector<InteractionEvent> evs2;
    for (int i = 0; i < 20; ++i) evs2.push_back(ev(i + 1, "q", true));
    for (int i = 0; i < 5; ++i) evs2.push_back(ev(21 + i, "q", i < 2));
    CHECK(derive_labels(record_of("s", evs2)).risk == 1.0);

    // tail rate exactly 0.5 is not risky
    std::vector<InteractionEvent> evs3;
    for (int i = 0; i < 20; ++i) evs3.push_back(ev(i + 1, "q", i % 2 == 0));
    CHECK(derive_labels(record_of("s", evs3)).risk == 0.0);
}

TEST_CASE("kfold_split: balance, determinism, stratification") {
    auto make_records = [](int n, int risky) {
        std::vector<StudentRecord> records;
        for (int i = 0; i < n; ++i) {
            // risky students answer everything wrong, others everything right
            const bool risk = i < risky;
            std::vector<InteractionEvent> evs;
            for (int t = 0; t < 5; ++t) evs.push_back(ev(t + 1, "q", !risk));
            records.push_back(record_of("s" + std::to_string(i), evs));
        }
        return records;
    };

    // 10 students, k=5: every fold exactly 2
    {
        const auto records = make_records(10, 0);
        const FoldPlan plan = kfold_split(records, 5, 1, false);
        std::map<int, int> sizes;
        for (const auto& [id, f] : plan.assignment) sizes[f]++;
        REQUIRE(sizes.size() == 5);
        for (const auto& [f, n] : sizes) CHECK(n == 2);
        plan.validate(records.size());
    }

    // deterministic in the seed
    {
        const auto records = make_records(17, 3);
        const FoldPlan a = kfold_split(records, 4, 9, true);
        const FoldPlan b = kfold_split(records, 4, 9, true);
        CHECK(a.assignment == b.assignment);
    }

    // stratified: 30 students, 6 risky, k=3 puts exactly 2 risky per fold
    {
        const auto records = make_records(30, 6);
        const FoldPlan plan = kfold_split(records, 3, 7, true);
        std::map<int, int> risky_per_fold, total_per_fold;
        for (const auto& rec : records) {
            const int f = plan.assignment.at(rec.student_id);
            total_per_fold[f]++;
            if (derive_labels(rec).risk > 0.5) risky_per_fold[f]++;
        }
        for (int f = 0; f < 3; ++f) {
            CHECK(risky_per_fold[f] == 2);
            CHECK(total_per_fold[f] == 10);
        }
    }

    // partition laws over random (n, k, seed) triples
    std::mt19937_64 rng(55);
    for (int iter = 0; iter < 100; ++iter) {
        const int k = 2 + static_cast<int>(rng() % 7);
        const int n = k + static_cast<int>(rng() % 40);
        const int risky = static_cast<int>(rng() % (n + 1));
        const bool strat = (rng() & 1) != 0;
        const auto records = make_records(n, risky);
        const FoldPlan plan = kfold_split(records, k, rng(), strat);

        CHECK(plan.assignment.size() == static_cast<std::size_t>(n));  // exhaustive, disjoint
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (const auto& rec : records) {
            const int f = plan.assignment.at(rec.student_id);
            CHECK(f >= 0);
            CHECK(f < k);
            sizes[static_cast<std::size_t>(f)]++;
        }
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
    }

    CHECK_THROWS_AS(kfold_split(make_records(3, 0), 5, 1, false), ConfigError);
    CHECK_THROWS_AS(kfold_split(make_records(5, 0), 1, 1, false), ConfigError);
}

TEST_CASE("gen_synthetic: determinism and validation") {
    SyntheticSpec spec;
    spec.n_students = 20;
    spec.seq_len_min = 5;
    spec.seq_len_max = 15;
    spec.n_questions = 10;
    const auto a = gen_synthetic(spec, 99);
    const auto b = gen_synthetic(spec, 99);
    CHECK(a.records == b.records);
    CHECK(a.skills == b.skills);
    const auto c = gen_synthetic(spec, 100);
    CHECK(a.records != c.records);

    CHECK(a.records.size() == 20);
    for (const auto& rec : a.records) {
        CHECK(rec.events.size() >= 5);
        CHECK(rec.events.size() <= 15);
        for (std::size_t i = 1; i < rec.events.size(); ++i)
            CHECK(rec.events[i].timestamp_ms > rec.events[i - 1].timestamp_ms);
    }

    SyntheticSpec bad = spec;
    bad.n_students = 0;
    CHECK_THROWS_AS(gen_synthetic(bad, 1), ConfigError);
    bad = spec;
    bad.seq_len_min = 20;
    CHECK_THROWS_AS(gen_synthetic(bad, 1), ConfigError);
}

TEST_CASE("gen_synthetic: infinite discrimination reduces to sign(skill - difficulty)") {
    SyntheticSpec spec;
    spec.n_students = 30;
    spec.seq_len_min = 10;
    spec.seq_len_max = 20;
    spec.n_questions = 15;
    spec.discrimination = 1e9;
    spec.fatigue = 0.0;
    const auto data = gen_synthetic(spec, 3);

    std::map<std::string, double> difficulty;
    for (const auto& q : data.questions) difficulty[q.question_id] = q.difficulty;
    for (std::size_t s = 0; s < data.records.size(); ++s)
        for (const auto& e : data.records[s].events)
            CHECK(e.correct == (data.skills[s] > difficulty.at(e.question_id)));
}

TEST_CASE("gen_synthetic: mean correctness matches the quadrature oracle") {
    SyntheticSpec spec;
    spec.n_students = 1000;
    spec.seq_len_min = 20;
    spec.seq_len_max = 40;
    spec.n_questions = 60;
    spec.discrimination = 6.0;
    spec.fatigue = 0.0;
    const auto data = gen_synthetic(spec, 12345);

    std::size_t correct = 0, total = 0;
    for (const auto& rec : data.records)
        for (const auto& e : rec.events) {
            correct += e.correct ? 1 : 0;
            ++total;
        }
    const double empirical = static_cast<double>(correct) / static_cast<double>(total);

    // E[sigmoid(a (s - d))] for s ~ U(0.2, 0.9), d ~ U(0.05, 0.70), via
    // composite Simpson over both sampling distributions
    const int n = 400;
    const double s_lo = 0.2, s_hi = 0.9, d_lo = 0.05, d_hi = 0.70;
    const double hs = (s_hi - s_lo) / n, hd = (d_hi - d_lo) / n;
    auto simpson_w = [&](int i) { return i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0); };
    double acc = 0.0, wsum = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const double s = s_lo + i * hs, d = d_lo + j * hd;
            const double w = simpson_w(i) * simpson_w(j);
            acc += w / (1.0 + std::exp(-spec.discrimination * (s - d)));
            wsum += w;
        }
    const double expected = acc / wsum;

    CHECK(std::abs(empirical - expected) / expected < 0.02);
}

TEST_CASE("gen_synthetic: higher skill means higher mean correctness") {
    SyntheticSpec spec;
    spec.n_students = 300;
    spec.seq_len_min = 30;
    spec.seq_len_max = 50;
    spec.n_questions = 40;
    spec.discrimination = 6.0;
    spec.fatigue = 0.25;
    spec.burst = 6;
    const auto data = gen_synthetic(spec, 777);

    std::vector<double> mean_correct;
    for (const auto& rec : data.records) {
        double c = 0;
        for (const auto& e : rec.events) c += e.correct ? 1.0 : 0.0;
        mean_correct.push_back(c / static_cast<double>(rec.events.size()));
    }
    CHECK(spearman(data.skills, mean_correct) > 0.8);
}

TEST_CASE("gen_synthetic: fatigue suppresses correctness inside long streaks") {
    SyntheticSpec base;
    base.n_students = 400;
    base.seq_len_min = 40;
    base.seq_len_max = 40;
    base.n_questions = 30;
    base.discrimination = 2.0;
    base.burst = 5;

    auto mean_correct = [](const SyntheticDataset& d) {
        double c = 0, n = 0;
        for (const auto& rec : d.records)
            for (const auto& e : rec.events) {
                c += e.correct ? 1 : 0;
                ++n;
            }
        return c / n;
    };
    SyntheticSpec fatigued = base;
    fatigued.fatigue = 0.3;
    const double with = mean_correct(gen_synthetic(fatigued, 5));
    const double without = mean_correct(gen_synthetic(base, 5));
    CHECK(with < without - 0.05);
}

TEST_CASE("write_dataset round-trips through load_events") {
    SyntheticSpec spec;
    spec.n_students = 8;
    spec.seq_len_min = 5;
    spec.seq_len_max = 10;
    spec.n_questions = 6;
    const auto data = gen_synthetic(spec, 42);

    TempDir dir("roundtrip");
    write_dataset(data, dir.path.string(), "config_hash=cafef00d");

    LoadStats stats;
    auto records = load_events((dir.path / "events.csv").string(),
                               (dir.path / "questions.csv").string(), &stats);
    load_static_features((dir.path / "static_features.csv").string(), records);

    REQUIRE(records.size() == data.records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].student_id == data.records[i].student_id);
        CHECK(records[i].events == data.records[i].events);
        REQUIRE(records[i].static_features.size() == 1);
        CHECK(records[i].static_features[0] ==
              doctest::Approx(data.records[i].static_features[0]).epsilon(1e-15));
    }
    CHECK(stats.unknown_question_warnings == 0);
}
