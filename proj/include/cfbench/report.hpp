#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cfbench {

struct ReportSummary {
    std::vector<std::string> results;   // experiment ids, in render order
    std::vector<std::string> files;     // written files, relative to the report directory
    std::vector<std::string> warnings;  // skipped inputs
};

/// Renders every `result_*.json` below `results_dir` into `out_dir`:
///   curves/<id>_eps2-<v>.csv   step,acc_D1,acc_D2,acc_joint,baseline
///   best_last.csv              "best/last" cells per dataset/model and task type
///   omega.csv                  omega_all cells in the same layout
///   imm/<id>.csv               alpha,mean,mode
///   report.txt                 included results and a footer of skipped inputs
/// Inputs are processed in sorted path order, so the output does not depend on
/// directory iteration order. Throws ConfigError when no result can be read.
ReportSummary generate_report(const std::filesystem::path& results_dir,
                              const std::filesystem::path& out_dir);

}  // namespace cfbench
