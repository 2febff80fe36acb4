#include "cfbench/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <unistd.h>

#include <json.hpp>

#include "cfbench/errors.hpp"
#include "cfbench/manifest.hpp"
#include "cfbench/records.hpp"
#include "cfbench/report.hpp"

namespace cfbench {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

class DirectoryLock {
public:
    explicit DirectoryLock(fs::path path) : path_(std::move(path)) {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (f == nullptr)
            throw std::runtime_error("output directory is locked (" + path_.string() +
                                     " exists); remove it if no other run is active");
        std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
        std::fclose(f);
    }
    ~DirectoryLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Moves `staged` over `target` once complete.
void publish(const fs::path& staged, const fs::path& target) {
    fs::rename(staged, target);
}

struct StagedExperiment {
    std::string id;
    fs::path records;
    fs::path result;
    std::optional<fs::path> checkpoint;
    std::string summary_row;
    double seconds = 0.0;
};

}  // namespace

int cmd_run(const fs::path& manifest_path, const RunOptions& options, std::ostream& out,
            std::ostream& err) {
    Manifest manifest;
    try {
        manifest = load_manifest(manifest_path, options.data_dir);
    } catch (const ManifestError& e) {
        err << "error: invalid manifest " << manifest_path.string() << "\n";
        for (const auto& p : e.problems())
            err << "  " << p << "\n";
        return kExitInvalid;
    }
    if (options.jobs) {
        if (*options.jobs == 0) {
            err << "error: --jobs must be at least 1\n";
            return kExitInvalid;
        }
        manifest.protocol.jobs = *options.jobs;
    }
    if (options.eval_every_batches)
        manifest.protocol.eval_every_batches = *options.eval_every_batches;
    if (options.output_dir)
        manifest.output_dir = *options.output_dir;

    DatasetPair data;
    try {
        data = load_manifest_data(manifest);
    } catch (const std::exception& e) {
        err << "error: cannot load dataset '" << manifest.data.name << "': " << e.what() << "\n";
        return kExitData;
    }

    const fs::path out_dir = manifest.output_dir;
    const bool created = !fs::exists(out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        err << "error: cannot create " << out_dir.string() << ": " << ec.message() << "\n";
        return kExitFailure;
    }

    const fs::path staging = out_dir / ".staging";
    auto cleanup = [&] {
        std::error_code ignore;
        fs::remove_all(staging, ignore);
        if (created && fs::is_empty(out_dir, ignore))
            fs::remove(out_dir, ignore);
    };

    std::optional<DirectoryLock> lock;
    try {
        lock.emplace(out_dir / ".lock");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitLocked;
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<StagedExperiment> staged;
    try {
        fs::remove_all(staging);
        fs::create_directories(staging);
        const auto configs = experiment_configs(manifest);
        for (std::size_t i = 0; i < configs.size(); ++i) {
            const auto start = std::chrono::steady_clock::now();
            const ExperimentResult res = run_experiment(configs[i], data);
            StagedExperiment s;
            s.id = experiment_id(res);
            s.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            std::string lines;
            for (const auto& l : record_lines(res))
                lines += l + "\n";
            s.records = staging / ("records-" + std::to_string(i) + ".jsonl");
            write_file(s.records, lines);
            s.result = staging / ("result_" + s.id + ".json");
            write_file(s.result, result_to_json(res, manifest.echo).dump(1) + "\n");
            if (manifest.checkpoints) {
                s.checkpoint = staging / (s.id + ".checkpoint.json");
                write_file(*s.checkpoint,
                           checkpoint_to_json(res.selected_model, res.ewc_fisher).dump() + "\n");
            }
            s.summary_row = summary_csv_row(res);
            out << s.id << ": q_best " << std::fixed << std::setprecision(4) << res.quality.q_best
                << ", q_last " << res.quality.q_last << ", baseline " << res.baseline
                << ", omega " << res.metric.omega_all << " (" << std::setprecision(1) << s.seconds
                << " s)\n"
                << std::defaultfloat;
            staged.push_back(std::move(s));
        }

        // Merge staging files into the final outputs.
        std::string records;
        std::string summary = summary_csv_header() + "\n";
        for (const auto& s : staged) {
            records += read_file(s.records);
            summary += s.summary_row + "\n";
        }
        write_file(staging / "records.jsonl", records);
        write_file(staging / "summary.csv", summary);

        Json timing;
        timing["tool_version"] = kToolVersion;
        timing["jobs"] = manifest.protocol.jobs;
        Json per = Json::array();
        for (const auto& s : staged)
            per.push_back({{"experiment", s.id}, {"wall_seconds", s.seconds}});
        timing["experiments"] = per;
        timing["total_wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_file(staging / "timing.json", timing.dump(1) + "\n");

        if (manifest.checkpoints)
            fs::create_directories(out_dir / "checkpoints");
        for (const auto& s : staged) {
            publish(s.result, out_dir / s.result.filename());
            if (s.checkpoint)
                publish(*s.checkpoint, out_dir / "checkpoints" / (s.id + ".json"));
        }
        publish(staging / "records.jsonl", out_dir / "records.jsonl");
        publish(staging / "summary.csv", out_dir / "summary.csv");
        publish(staging / "timing.json", out_dir / "timing.json");
        fs::remove_all(staging);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        lock.reset();
        cleanup();
        return kExitFailure;
    }
    out << "wrote " << staged.size() << " result(s) to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_report(const fs::path& dir, const std::optional<fs::path>& out_dir, std::ostream& out,
               std::ostream& err) {
    const fs::path target = out_dir.value_or(dir / "report");
    try {
        const ReportSummary s = generate_report(dir, target);
        out << "rendered " << s.results.size() << " result(s) into " << target.string() << "\n";
        for (const auto& f : s.files)
            out << "  " << f << "\n";
        if (!s.warnings.empty()) {
            err << "warnings:\n";
            for (const auto& w : s.warnings)
                err << "  " << w << "\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_list(const std::string& what, const std::optional<std::string>& model, std::ostream& out,
             std::ostream& err) {
    auto classes = [](const std::vector<int>& c) {
        std::string s = "{";
        for (std::size_t i = 0; i < c.size(); ++i)
            s += (i ? "," : "") + std::to_string(c[i]);
        return s + "}";
    };
    if (what == "slts") {
        for (const auto& s : list_slts("all")) {
            out << std::left << std::setw(10) << s.name << std::setw(9) << to_string(s.type);
            if (s.kind == SltKind::Partition)
                out << "D1=" << classes(s.d1_classes) << " D2=" << classes(s.d2_classes) << "\n";
            else
                out << "D1=all classes, identity pixels  D2=all classes, permuted pixels\n";
        }
        return kExitOk;
    }
    if (what == "models") {
        for (ModelKind k : all_model_kinds())
            out << to_string(k) << "\n";
        return kExitOk;
    }
    if (what == "grids") {
        std::vector<ModelKind> kinds = all_model_kinds();
        if (model) {
            try {
                kinds = {model_kind_from_string(*model)};
            } catch (const ConfigError& e) {
                err << "error: " << e.what() << "\n";
                return kExitInvalid;
            }
        }
        for (ModelKind k : kinds) {
            const Grid g = build_grid(k);
            out << to_string(k) << ": " << g.points.size() << " phase-1 points x " << g.eps2.size()
                << " eps2 values\n";
            for (std::size_t i = 0; i < g.points.size(); ++i)
                out << "  [" << i << "] " << g.points[i].label() << "\n";
        }
        return kExitOk;
    }
    err << "error: unknown listing '" << what << "' (expected slts, models or grids)\n";
    return kExitInvalid;
}

}  // namespace cfbench
