#include "edulstm/commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "edulstm/checkpoint.hpp"
#include "edulstm/errors.hpp"

namespace fs = std::filesystem;

namespace edulstm {

namespace {

using nlohmann::json;

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << content;
    if (!out) throw DataError("write failed: " + path.string());
}

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

ModelConfig model_config_base(const RunConfig& cfg) {
    ModelConfig mc;
    mc.hidden_dim = cfg.hidden_dim;
    mc.tasks = cfg.tasks;
    mc.dropout_rate = cfg.dropout_rate;
    mc.fuse_forget_gate = cfg.fuse_forget_gate;
    mc.input_dim = 3 + cfg.hash_buckets;  // refined per dataset after encoding
    return mc;
}

std::string describe_model(const ModelConfig& m, std::size_t hash_buckets) {
    std::ostringstream out;
    out << "hidden_dim=" << m.hidden_dim << " input_dim=" << m.input_dim
        << " static_dim=" << m.static_dim << " hash_buckets=" << hash_buckets
        << " fuse_forget_gate=" << (m.fuse_forget_gate ? "true" : "false") << " tasks=[";
    for (std::size_t i = 0; i < m.tasks.size(); ++i)
        out << (i ? "," : "") << task_name(m.tasks[i]);
    out << "]";
    return out.str();
}

void check_checkpoint_compatible(const RunConfig& cfg, const Checkpoint& ckpt) {
    const bool ok = ckpt.model.hidden_dim == cfg.hidden_dim &&
                    ckpt.model.tasks == cfg.tasks &&
                    ckpt.model.fuse_forget_gate == cfg.fuse_forget_gate &&
                    ckpt.encoding.hash_buckets == cfg.hash_buckets;
    if (!ok) {
        ModelConfig want = model_config_base(cfg);
        throw ConfigError("checkpoint does not match the configured model; checkpoint has " +
                          describe_model(ckpt.model, ckpt.encoding.hash_buckets) +
                          ", config wants " + describe_model(want, cfg.hash_buckets));
    }
}

void write_metrics(const RunConfig& cfg, const Metrics& metrics, const std::string& stem) {
    const std::string hash = cfg.config_hash();
    if (cfg.format != ReportFormat::Json)
        write_text(fs::path(cfg.out_dir) / (stem + ".csv"), metrics_to_csv(metrics, hash));
    if (cfg.format != ReportFormat::Csv)
        write_text(fs::path(cfg.out_dir) / (stem + ".json"), metrics_to_json_string(metrics, hash));
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    cfg.validate_for(Command::Synth);
    const SyntheticDataset data = gen_synthetic(*cfg.synthetic, cfg.synthetic->seed);
    write_dataset(data, cfg.out_dir, "config_hash=" + cfg.config_hash());
}

void cmd_train(const RunConfig& cfg) {
    cfg.validate_for(Command::Train);
    const auto records = load_records(cfg);
    if (records.empty()) throw DataError("no usable student records after cleaning");

    const EncodingConfig enc = EncodingConfig::fit(records, cfg.hash_buckets);
    ModelConfig mc = model_config_base(cfg);
    mc.input_dim = enc.feature_dim();
    mc.static_dim = enc.static_dim;

    const TrainResult res = train(records, cfg.train, mc, enc);

    fs::create_directories(cfg.out_dir);
    Checkpoint ckpt;
    ckpt.model = mc;
    ckpt.encoding = enc;
    ckpt.init_seed = res.init_seed;
    ckpt.train_seed = cfg.train.seed;
    ckpt.params = res.params;
    save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.bin").string(), ckpt);

    std::ostringstream log;
    log << "# config_hash=" << cfg.config_hash() << "\n";
    log << "epoch,lr,loss\n";
    for (const auto& e : res.epoch_logs)
        log << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.mean_loss) << '\n';
    write_text(fs::path(cfg.out_dir) / "epoch_log.csv", log.str());
}

void cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    cfg.validate_for(Command::Eval);
    if (!fs::exists(checkpoint_path))
        throw ConfigError("checkpoint not found: " + checkpoint_path);
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    check_checkpoint_compatible(cfg, ckpt);

    const auto records = load_records(cfg);
    if (records.empty()) throw DataError("no usable student records after cleaning");

    const Metrics metrics =
        evaluate(ckpt.params, ckpt.model, records, ckpt.encoding, cfg.train.threshold);
    fs::create_directories(cfg.out_dir);
    write_metrics(cfg, metrics, "metrics");
}

void cmd_crossval(const RunConfig& cfg) {
    cfg.validate_for(Command::Crossval);
    const auto records = load_records(cfg);
    if (records.empty()) throw DataError("no usable student records after cleaning");

    const FoldPlan plan = kfold_split(records, cfg.cv.k, cfg.cv.seed, cfg.cv.stratify_by_risk);
    const CvReport report = cross_validate(records, plan, cfg.train, model_config_base(cfg),
                                           cfg.hash_buckets, cfg.cv.methods, cfg.parallel_folds);

    fs::create_directories(cfg.out_dir);
    const std::string hash = cfg.config_hash();
    if (cfg.format != ReportFormat::Json)
        write_text(fs::path(cfg.out_dir) / "cv_report.csv", report.to_csv(hash));
    if (cfg.format != ReportFormat::Csv)
        write_text(fs::path(cfg.out_dir) / "cv_report.json", report.to_json_string(hash));
}

void cmd_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& student_id) {
    cfg.validate_for(Command::Predict);
    if (!fs::exists(checkpoint_path))
        throw ConfigError("checkpoint not found: " + checkpoint_path);
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    check_checkpoint_compatible(cfg, ckpt);

    const auto records = load_records(cfg);
    const StudentRecord* found = nullptr;
    for (const auto& rec : records)
        if (rec.student_id == student_id) {
            found = &rec;
            break;
        }
    if (!found) throw ConfigError("student not found: " + student_id);

    const EncodedSequence seq = encode(*found, ckpt.encoding);
    std::mt19937_64 rng(0);
    auto [outputs, trace] =
        forward(ckpt.model, ckpt.params, seq.xs, seq.z, RunMode::Infer, 0.0, rng);

    fs::create_directories(cfg.out_dir);
    const std::string hash = cfg.config_hash();

    if (cfg.format != ReportFormat::Csv) {
        json root;
        root["config_hash"] = hash;
        root["student_id"] = student_id;
        for (std::size_t k = 0; k < ckpt.model.tasks.size(); ++k) {
            const Task t = ckpt.model.tasks[k];
            if (t == Task::NextCorrect)
                root["next_correct"] = outputs.values[k];
            else
                root["tasks"][task_name(t)] = outputs.values[k][0];
        }
        write_text(fs::path(cfg.out_dir) / "prediction.json", root.dump(2) + "\n");
    }
    if (cfg.format != ReportFormat::Json) {
        std::ostringstream out;
        out << "# config_hash=" << hash << "\n";
        out << "kind,index,value\n";
        for (std::size_t k = 0; k < ckpt.model.tasks.size(); ++k) {
            const Task t = ckpt.model.tasks[k];
            if (t == Task::NextCorrect) {
                for (std::size_t j = 0; j < outputs.values[k].size(); ++j)
                    out << "next_correct," << j << ',' << fmt(outputs.values[k][j]) << '\n';
            } else {
                out << task_name(t) << ",0," << fmt(outputs.values[k][0]) << '\n';
            }
        }
        write_text(fs::path(cfg.out_dir) / "prediction.csv", out.str());
    }
}

}  // namespace edulstm
