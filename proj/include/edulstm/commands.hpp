#pragma once

#include <string>

#include "edulstm/config.hpp"

namespace edulstm {

// Subcommand bodies behind the CLI. Each validates the full config before
// touching the filesystem and throws on failure; the caller maps exceptions
// to exit codes.
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path);
void cmd_crossval(const RunConfig& cfg);
void cmd_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& student_id);

}  // namespace edulstm
