#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace cfbench {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,   // training or I/O failure after validation
    kExitInvalid = 2,   // manifest / argument validation
    kExitData = 3,      // dataset could not be loaded
    kExitLocked = 4,    // output directory in use
};

struct RunOptions {
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> eval_every_batches;
    std::optional<std::filesystem::path> data_dir;
    std::optional<std::filesystem::path> output_dir;
};

/// Validates the manifest, loads data, runs every task and writes into the output
/// directory: records.jsonl, summary.csv, result_<id>.json, timing.json and, when
/// enabled, checkpoints/<id>.json. Nothing is written unless validation and data
/// loading succeed; files appear only once all tasks finished.
int cmd_run(const std::filesystem::path& manifest, const RunOptions& options, std::ostream& out,
            std::ostream& err);

/// Renders tables and figure data (default: <dir>/report).
int cmd_report(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& out_dir,
               std::ostream& out, std::ostream& err);

/// what: slts | models | grids; `model` restricts the grids listing.
int cmd_list(const std::string& what, const std::optional<std::string>& model, std::ostream& out,
             std::ostream& err);

}  // namespace cfbench
