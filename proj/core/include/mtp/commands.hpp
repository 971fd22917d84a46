#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mtp/config.hpp"

namespace mtp {

enum class Command { Analyze, Simulate, DiagnoseShift, Screen };

struct CommandOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> output_dir_override;
    std::optional<int> jobs_override;
    bool validate_only = false;
};

// Loads the config, applies overrides, and runs the command. Progress and a
// short summary go to `err`; result files go to the configured output dir.
// Exceptions propagate to the caller.
void run_command(Command cmd, const CommandOptions& options, std::ostream& err);

// Same, but maps exceptions to exit codes after printing the message to
// `err`: 0 success, 2 config error, 3 data error, 4 estimation error,
// 1 anything else.
int run_command_exit_code(Command cmd, const CommandOptions& options, std::ostream& err);

// Individual commands, for embedding; cfg must already be loaded/validated.
void cmd_analyze(const RunConfig& cfg, int jobs, std::ostream& err);
void cmd_simulate(const RunConfig& cfg, int jobs, std::ostream& err);
void cmd_diagnose_shift(const RunConfig& cfg, std::ostream& err);
void cmd_screen(const RunConfig& cfg, std::ostream& err);

}  // namespace mtp
