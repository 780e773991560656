#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "edulstm/commands.hpp"
#include "edulstm/errors.hpp"

namespace {

// One machine-readable line on stderr per failure.
void report_error(const char* kind, const std::string& message) {
    nlohmann::json err;
    err["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << err.dump() << std::endl;
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> parallel_folds;
    std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration")->required();
    cmd->add_option("--seed", flags.seed, "override every configured seed");
    cmd->add_option("--out-dir", flags.out_dir, "override the output directory");
    cmd->add_option("--parallel-folds", flags.parallel_folds,
                    "run cross-validation folds on this many threads");
    cmd->add_option("--format", flags.format, "report format: csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
}

edulstm::RunConfig resolve_config(const CommonFlags& flags) {
    edulstm::RunConfig cfg = edulstm::load_run_config(flags.config_path);
    if (flags.seed) {
        cfg.train.seed = *flags.seed;
        cfg.cv.seed = *flags.seed;
        if (cfg.synthetic) cfg.synthetic->seed = *flags.seed;
    }
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.parallel_folds) cfg.parallel_folds = *flags.parallel_folds;
    if (flags.format) {
        if (*flags.format == "csv") cfg.format = edulstm::ReportFormat::Csv;
        else if (*flags.format == "json") cfg.format = edulstm::ReportFormat::Json;
        else cfg.format = edulstm::ReportFormat::Both;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Student-performance sequence modeling: a static-feature-fused LSTM "
                 "with multi-task heads, classical baselines and K-fold evaluation"};
    app.require_subcommand(1);

    CommonFlags synth_flags, train_flags, eval_flags, crossval_flags, predict_flags;
    std::string checkpoint_path, student_id;

    add_common(app.add_subcommand("synth", "generate a synthetic dataset"), synth_flags);
    add_common(app.add_subcommand("train", "train a model and write a checkpoint"), train_flags);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    add_common(app.add_subcommand("crossval", "K-fold comparison of the configured methods"),
               crossval_flags);
    auto* predict_cmd = app.add_subcommand("predict", "per-task predictions for one student");
    add_common(predict_cmd, predict_flags);
    predict_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    predict_cmd->add_option("--student", student_id, "student id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        report_error("usage", e.what());
        return 1;
    }

    try {
        if (app.got_subcommand("synth")) {
            edulstm::cmd_synth(resolve_config(synth_flags));
        } else if (app.got_subcommand("train")) {
            edulstm::cmd_train(resolve_config(train_flags));
        } else if (app.got_subcommand("eval")) {
            edulstm::cmd_eval(resolve_config(eval_flags), checkpoint_path);
        } else if (app.got_subcommand("crossval")) {
            edulstm::cmd_crossval(resolve_config(crossval_flags));
        } else if (app.got_subcommand("predict")) {
            edulstm::cmd_predict(resolve_config(predict_flags), checkpoint_path, student_id);
        }
    } catch (const edulstm::ConfigError& e) {
        report_error("validation", e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return 2;
    }
    return 0;
}
