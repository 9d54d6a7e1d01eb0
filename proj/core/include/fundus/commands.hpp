#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fundus/config.hpp"

namespace fundus {

void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_train_seg(const RunConfig& cfg, std::ostream& log);
void cmd_train_cls(const RunConfig& cfg, std::ostream& log);
void cmd_predict_seg(const RunConfig& cfg, std::ostream& log);
void cmd_predict_cls(const RunConfig& cfg, std::ostream& log);
void cmd_eval_seg(const RunConfig& cfg, std::ostream& log);
void cmd_eval_cls(const RunConfig& cfg, std::ostream& log);

// Dispatches `args` (subcommand followed by --key value pairs; --config is
// applied first, remaining flags override it). Returns 0 on success; on
// error prints one diagnostic line to `err` and returns 1.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

} // namespace fundus
