#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfbench/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Catastrophic-forgetting benchmark for continual-learning models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    std::string manifest;
    std::size_t jobs = 1;
    std::optional<std::size_t> eval_every;
    std::string data_dir;
    std::string output_dir;
    auto* run = app.add_subcommand("run", "Run every task of an experiment manifest");
    run->add_option("manifest", manifest, "Manifest JSON file")->required()->check(CLI::ExistingFile);
    auto* jobs_opt = run->add_option("--jobs,-j", jobs, "Parallel training jobs")->check(CLI::PositiveNumber);
    run->add_option("--eval-every-batches", eval_every,
                    "Evaluate every K batches instead of once per epoch");
    auto* data_opt = run->add_option("--data-dir", data_dir, "Base directory for dataset paths")
                         ->envname("CF_BENCH_DATA");
    auto* out_opt = run->add_option("--output,-o", output_dir, "Override the manifest output directory");

    std::string results_dir;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Render tables and figure data from results");
    report->add_option("dir", results_dir, "Directory with result_*.json files")->required();
    auto* report_out_opt = report->add_option("--out", report_out, "Output directory (default <dir>/report)");

    std::string what;
    std::string model;
    auto* list = app.add_subcommand("list", "List tasks, models or search grids");
    list->add_option("what", what, "slts | models | grids")->required();
    auto* model_opt = list->add_option("model", model, "Model kind for 'grids'");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        cfbench::RunOptions o;
        if (*jobs_opt)
            o.jobs = jobs;
        o.eval_every_batches = eval_every;
        if (*data_opt && !data_dir.empty())
            o.data_dir = data_dir;
        if (*out_opt)
            o.output_dir = output_dir;
        return cfbench::cmd_run(manifest, o, std::cout, std::cerr);
    }
    if (report->parsed()) {
        std::optional<std::filesystem::path> out;
        if (*report_out_opt)
            out = report_out;
        return cfbench::cmd_report(results_dir, out, std::cout, std::cerr);
    }
    std::optional<std::string> m;
    if (*model_opt)
        m = model;
    return cfbench::cmd_list(what, m, std::cout, std::cerr);
}
