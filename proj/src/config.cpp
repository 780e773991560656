#include "edulstm/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "edulstm/errors.hpp"
#include "edulstm/rng.hpp"

namespace fs = std::filesystem;

namespace edulstm {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& origin, const std::string& msg) {
    throw ConfigError(origin + ": " + msg);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

ScheduleSpec parse_schedule(const json& j, const std::string& origin) {
    ScheduleSpec s;
    const std::string kind = get_or<std::string>(j, "kind", "constant");
    if (kind == "constant") s.kind = ScheduleKind::Constant;
    else if (kind == "exponential") s.kind = ScheduleKind::Exponential;
    else if (kind == "cyclical") s.kind = ScheduleKind::Cyclical;
    else bad(origin, "unknown schedule kind '" + kind + "'");
    s.alpha0 = get_or(j, "alpha0", s.alpha0);
    s.decay_k = get_or(j, "k", s.decay_k);
    s.base_lr = get_or(j, "base_lr", s.base_lr);
    s.max_lr = get_or(j, "max_lr", s.max_lr);
    s.period = get_or(j, "period", s.period);
    return s;
}

json schedule_to_json(const ScheduleSpec& s) {
    switch (s.kind) {
        case ScheduleKind::Constant:
            return {{"kind", "constant"}, {"alpha0", s.alpha0}};
        case ScheduleKind::Exponential:
            return {{"kind", "exponential"}, {"alpha0", s.alpha0}, {"k", s.decay_k}};
        case ScheduleKind::Cyclical:
            return {{"kind", "cyclical"}, {"alpha0", s.alpha0}, {"base_lr", s.base_lr},
                    {"max_lr", s.max_lr}, {"period", s.period}};
    }
    return {};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        bad(origin, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) bad(origin, "config root must be an object");

    RunConfig cfg;
    if (!j.contains("version")) bad(origin, "missing 'version'");
    cfg.version = j.at("version").get<int>();
    if (cfg.version != 1) bad(origin, "unsupported config version " + std::to_string(cfg.version));

    if (j.contains("data")) {
        const json& d = j.at("data");
        DataPaths p;
        p.events = get_or<std::string>(d, "events", "");
        p.questions = get_or<std::string>(d, "questions", "");
        p.static_features = get_or<std::string>(d, "static_features", "");
        cfg.data = p;
    }
    if (j.contains("synthetic")) {
        const json& s = j.at("synthetic");
        SyntheticSpec spec;
        spec.n_students = get_or<std::size_t>(s, "n_students", 0);
        spec.seq_len_min = get_or<std::size_t>(s, "seq_len_min", 0);
        spec.seq_len_max = get_or<std::size_t>(s, "seq_len_max", 0);
        spec.n_questions = get_or<std::size_t>(s, "n_questions", 0);
        spec.discrimination = get_or(s, "discrimination", spec.discrimination);
        spec.fatigue = get_or(s, "fatigue", spec.fatigue);
        spec.burst = get_or(s, "burst", spec.burst);
        spec.seed = get_or(s, "seed", spec.seed);
        cfg.synthetic = spec;
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        cfg.hidden_dim = get_or(m, "hidden_dim", cfg.hidden_dim);
        cfg.dropout_rate = get_or(m, "dropout_rate", cfg.dropout_rate);
        cfg.fuse_forget_gate = get_or(m, "fuse_forget_gate", cfg.fuse_forget_gate);
        cfg.hash_buckets = get_or(m, "hash_buckets", cfg.hash_buckets);
        if (m.contains("tasks")) {
            cfg.tasks.clear();
            for (const auto& t : m.at("tasks")) cfg.tasks.push_back(task_from_name(t.get<std::string>()));
        }
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        cfg.train.epochs = get_or(t, "epochs", cfg.train.epochs);
        cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size);
        const std::string opt = get_or<std::string>(t, "optimizer", "adam");
        if (opt == "adam") cfg.train.optimizer = OptimizerKind::Adam;
        else if (opt == "sgd") cfg.train.optimizer = OptimizerKind::Sgd;
        else bad(origin, "unknown optimizer '" + opt + "'");
        if (t.contains("schedule")) cfg.train.schedule = parse_schedule(t.at("schedule"), origin);
        const std::string unit = get_or<std::string>(t, "schedule_unit", "epoch");
        if (unit == "epoch") cfg.train.schedule_unit = ScheduleUnit::Epoch;
        else if (unit == "batch") cfg.train.schedule_unit = ScheduleUnit::Batch;
        else bad(origin, "unknown schedule_unit '" + unit + "'");
        cfg.train.dropout_rate = get_or(t, "dropout_rate", cfg.dropout_rate);
        cfg.train.clip_norm = get_or(t, "clip_norm", cfg.train.clip_norm);
        cfg.train.seed = get_or(t, "seed", cfg.train.seed);
        cfg.train.threshold = get_or(t, "threshold", cfg.train.threshold);
        cfg.min_len = get_or(t, "min_len", cfg.min_len);
        if (t.contains("loss_weights")) {
            const json& lw = t.at("loss_weights");
            cfg.train.loss_weights.clear();
            for (Task task : cfg.tasks)
                cfg.train.loss_weights.push_back(get_or(lw, task_name(task), 1.0));
        }
    } else {
        cfg.train.dropout_rate = cfg.dropout_rate;
    }

    if (j.contains("cv")) {
        const json& c = j.at("cv");
        cfg.cv.k = get_or(c, "k", cfg.cv.k);
        cfg.cv.stratify_by_risk = get_or(c, "stratify_by_risk", cfg.cv.stratify_by_risk);
        cfg.cv.seed = get_or(c, "seed", cfg.cv.seed);
        if (c.contains("methods")) {
            cfg.cv.methods.clear();
            for (const auto& m : c.at("methods"))
                cfg.cv.methods.push_back(method_from_name(m.get<std::string>()));
        }
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        cfg.out_dir = get_or<std::string>(o, "dir", cfg.out_dir);
        const std::string f = get_or<std::string>(o, "format", "both");
        if (f == "csv") cfg.format = ReportFormat::Csv;
        else if (f == "json") cfg.format = ReportFormat::Json;
        else if (f == "both") cfg.format = ReportFormat::Both;
        else bad(origin, "unknown format '" + f + "'");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

std::string RunConfig::config_hash() const {
    json j;
    j["version"] = version;
    if (data) {
        j["data"] = {{"events", data->events},
                     {"questions", data->questions},
                     {"static_features", data->static_features}};
    }
    if (synthetic) {
        j["synthetic"] = {{"n_students", synthetic->n_students},
                          {"seq_len_min", synthetic->seq_len_min},
                          {"seq_len_max", synthetic->seq_len_max},
                          {"n_questions", synthetic->n_questions},
                          {"discrimination", synthetic->discrimination},
                          {"fatigue", synthetic->fatigue},
                          {"burst", synthetic->burst},
                          {"seed", synthetic->seed}};
    }
    json tasks_json = json::array();
    for (Task t : tasks) tasks_json.push_back(task_name(t));
    j["model"] = {{"hidden_dim", hidden_dim},
                  {"dropout_rate", dropout_rate},
                  {"fuse_forget_gate", fuse_forget_gate},
                  {"hash_buckets", hash_buckets},
                  {"tasks", tasks_json}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"optimizer", train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                  {"schedule", schedule_to_json(train.schedule)},
                  {"schedule_unit", train.schedule_unit == ScheduleUnit::Epoch ? "epoch" : "batch"},
                  {"dropout_rate", train.dropout_rate},
                  {"loss_weights", train.loss_weights},
                  {"clip_norm", train.clip_norm},
                  {"seed", train.seed},
                  {"threshold", train.threshold},
                  {"min_len", min_len}};
    json methods_json = json::array();
    for (Method m : cv.methods) methods_json.push_back(method_name(m));
    j["cv"] = {{"k", cv.k},
               {"stratify_by_risk", cv.stratify_by_risk},
               {"methods", methods_json},
               {"seed", cv.seed}};

    const std::string canonical = j.dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    return buf;
}

void RunConfig::validate_for(Command cmd) const {
    if (static_cast<bool>(data) == static_cast<bool>(synthetic))
        throw ConfigError("config must contain exactly one of 'data' and 'synthetic'");

    if (cmd == Command::Synth && !synthetic)
        throw ConfigError("synth requires a 'synthetic' section");
    if (synthetic) synthetic->validate();
    if (data) {
        if (data->events.empty() || data->questions.empty())
            throw ConfigError("'data' needs both 'events' and 'questions' paths");
        if (!fs::exists(data->events)) throw ConfigError("events path not found: " + data->events);
        if (!fs::exists(data->questions))
            throw ConfigError("questions path not found: " + data->questions);
        if (!data->static_features.empty() && !fs::exists(data->static_features))
            throw ConfigError("static features path not found: " + data->static_features);
    }

    ModelConfig mc;
    mc.hidden_dim = hidden_dim;
    mc.input_dim = 3 + hash_buckets;
    mc.tasks = tasks;
    mc.dropout_rate = dropout_rate;
    mc.validate();
    if (hash_buckets < 1) throw ConfigError("hash_buckets must be >= 1");
    if (min_len < 2) throw ConfigError("min_len must be >= 2");

    train.validate();
    if (!train.loss_weights.empty() && train.loss_weights.size() != tasks.size())
        throw ConfigError("loss_weights must cover every configured task");

    if (cmd == Command::Crossval) {
        if (cv.k < 2) throw ConfigError("cv.k must be >= 2");
        if (cv.methods.empty()) throw ConfigError("cv.methods must not be empty");
    }
    if (parallel_folds < 1) throw ConfigError("--parallel-folds must be >= 1");
    if (out_dir.empty()) throw ConfigError("output directory must not be empty");
}

std::vector<StudentRecord> load_records(const RunConfig& cfg) {
    std::vector<StudentRecord> records;
    if (cfg.synthetic) {
        records = gen_synthetic(*cfg.synthetic, cfg.synthetic->seed).records;
    } else {
        records = load_events(cfg.data->events, cfg.data->questions);
        if (!cfg.data->static_features.empty())
            load_static_features(cfg.data->static_features, records);
    }
    return clean(std::move(records), cfg.min_len);
}

}  // namespace edulstm
