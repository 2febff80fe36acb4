#include "cfbench/report.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "cfbench/errors.hpp"
#include "cfbench/metrics.hpp"
#include "cfbench/protocol.hpp"
#include "cfbench/records.hpp"

namespace cfbench {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct CurveRow {
    std::size_t step = 0;
    std::optional<double> d1, d2, joint;
};

struct LoadedRun {
    std::string phase;
    std::size_t grid_index = 0;
    std::optional<double> eps2;
    std::vector<CurveRow> curve;
};

struct LoadedResult {
    std::string id;
    std::string dataset;
    std::string model;
    SltSpec slt;
    double q_best = 0.0;
    double q_last = 0.0;
    double baseline = 0.0;
    std::size_t selected_index = 0;
    std::size_t selected_step = 0;
    std::vector<LoadedRun> runs;
    std::optional<std::vector<std::array<double, 3>>> imm;  // alpha, mean, mode
};

std::optional<double> opt(const Json& j) {
    if (j.is_null())
        return std::nullopt;
    return j.get<double>();
}

double unit_interval(const Json& j, const char* what) {
    const double v = j.get<double>();
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(std::string(what) + " outside [0, 1]");
    return v;
}

LoadedResult parse_result(const Json& j) {
    if (j.at("schema_version").get<int>() != kRecordSchemaVersion)
        throw ConfigError("unsupported schema version");
    LoadedResult r;
    r.id = j.at("experiment").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    model_kind_from_string(r.model);
    const Json& s = j.at("slt");
    r.slt.name = s.at("name").get<std::string>();
    r.slt.type = slt_type_from_string(s.at("type").get<std::string>());
    r.slt.kind = s.at("kind").get<std::string>() == "permutation" ? SltKind::Permutation
                                                                   : SltKind::Partition;
    const Json& q = j.at("quality");
    r.q_best = unit_interval(q.at("q_best"), "q_best");
    r.q_last = unit_interval(q.at("q_last"), "q_last");
    r.baseline = unit_interval(j.at("baseline"), "baseline");
    if (!(r.baseline > 0.0))
        throw ConfigError("baseline accuracy is zero");
    r.selected_index = j.at("selection").at("grid_index").get<std::size_t>();
    r.selected_step = j.at("selection").at("step").get<std::size_t>();
    for (const Json& run : j.at("runs")) {
        LoadedRun lr;
        lr.phase = run.at("phase").get<std::string>();
        lr.grid_index = run.at("grid_index").get<std::size_t>();
        lr.eps2 = opt(run.at("eps2"));
        for (const Json& p : run.at("curve"))
            lr.curve.push_back({p.at("step").get<std::size_t>(), opt(p.at("acc_d1")),
                                opt(p.at("acc_d2")), opt(p.at("acc_joint"))});
        r.runs.push_back(std::move(lr));
    }
    if (!j.at("imm").is_null()) {
        const Json& t = j["imm"];
        const auto alphas = t.at("alphas").get<std::vector<double>>();
        const auto mean = t.at("mean").get<std::vector<double>>();
        const auto mode = t.at("mode").get<std::vector<double>>();
        if (mean.size() != alphas.size() || mode.size() != alphas.size())
            throw ConfigError("IMM tuning arrays differ in length");
        std::vector<std::array<double, 3>> rows;
        for (std::size_t i = 0; i < alphas.size(); ++i)
            rows.push_back({alphas[i], mean[i], mode[i]});
        r.imm = std::move(rows);
    }
    return r;
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string curve_csv(const LoadedResult& r, const LoadedRun& phase2) {
    std::ostringstream os;
    os << "step,acc_D1,acc_D2,acc_joint,baseline\n";
    const std::string base = format_double(r.baseline);
    for (const auto& run : r.runs) {
        if (run.phase != "phase1" || run.grid_index != r.selected_index)
            continue;
        for (const auto& p : run.curve)
            if (p.step < r.selected_step)
                os << p.step << "," << cell(p.d1) << "," << cell(p.d2) << "," << cell(p.joint)
                   << "," << base << "\n";
    }
    for (const auto& p : phase2.curve)
        os << r.selected_step + p.step << "," << cell(p.d1) << "," << cell(p.d2) << ","
           << cell(p.joint) << "," << base << "\n";
    return os.str();
}

std::size_t model_rank(const std::string& model) {
    const auto kinds = all_model_kinds();
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (to_string(kinds[i]) == model)
            return i;
    return kinds.size();
}

}  // namespace

ReportSummary generate_report(const fs::path& results_dir, const fs::path& out_dir) {
    std::error_code ec;
    if (!fs::is_directory(results_dir, ec))
        throw ConfigError("not a directory: " + results_dir.string());

    const fs::path out_abs = fs::weakly_canonical(out_dir);
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
        if (!entry.is_regular_file())
            continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("result_", 0) != 0 || entry.path().extension() != ".json")
            continue;
        const fs::path abs = fs::weakly_canonical(entry.path());
        const auto rel_to_out = abs.lexically_relative(out_abs);
        if (!rel_to_out.empty() && *rel_to_out.begin() != "..")
            continue;
        inputs.push_back(entry.path().lexically_relative(results_dir));
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty())
        throw ConfigError("no result files (result_*.json) found in " + results_dir.string());

    ReportSummary summary;
    std::vector<LoadedResult> results;
    std::set<std::string> seen;
    for (const auto& rel : inputs) {
        try {
            std::ifstream in(results_dir / rel, std::ios::binary);
            const Json doc = Json::parse(in);
            LoadedResult r = parse_result(doc);
            if (!seen.insert(r.id).second) {
                summary.warnings.push_back(rel.generic_string() + ": duplicate experiment " + r.id);
                continue;
            }
            results.push_back(std::move(r));
        } catch (const std::exception& e) {
            summary.warnings.push_back(rel.generic_string() + ": skipped (" + e.what() + ")");
        }
    }
    if (results.empty()) {
        std::string msg = "no readable result files in " + results_dir.string();
        for (const auto& w : summary.warnings)
            msg += "\n  " + w;
        throw ConfigError(msg);
    }
    std::sort(results.begin(), results.end(), [](const LoadedResult& a, const LoadedResult& b) {
        return std::tuple(a.dataset, model_rank(a.model), a.model, a.slt.name) <
               std::tuple(b.dataset, model_rank(b.model), b.model, b.slt.name);
    });

    auto emit = [&](const std::string& rel, const std::string& text) {
        write_text(out_dir / rel, text);
        summary.files.push_back(rel);
    };

    // Per-run curves and IMM tuning curves.
    for (const auto& r : results) {
        summary.results.push_back(r.id);
        for (const auto& run : r.runs) {
            if (run.phase != "phase2")
                continue;
            emit("curves/" + r.id + "_eps2-" + cell(run.eps2) + ".csv", curve_csv(r, run));
        }
        if (r.imm) {
            std::ostringstream os;
            os << "alpha,mean,mode\n";
            for (const auto& row : *r.imm)
                os << format_double(row[0]) << "," << format_double(row[1]) << ","
                   << format_double(row[2]) << "\n";
            emit("imm/" + r.id + ".csv", os.str());
        }
    }

    // Task-type matrices, aggregated with the minimum over variants.
    const std::vector<SltType> types{SltType::D5_5, SltType::D9_1, SltType::DP10_10};
    std::map<std::pair<std::string, std::string>, std::map<SltType, std::vector<MetricRecord>>> groups;
    std::vector<std::pair<std::string, std::string>> row_order;
    for (const auto& r : results) {
        const auto key = std::pair(r.dataset, r.model);
        if (!groups.contains(key))
            row_order.push_back(key);
        groups[key][r.slt.type].push_back(
            make_metric_record(r.dataset, r.model, r.slt, r.q_best, r.q_last, r.baseline));
    }
    std::ostringstream best_last, omega;
    best_last << "dataset,model";
    omega << "dataset,model";
    for (SltType t : types) {
        best_last << "," << to_string(t);
        omega << "," << to_string(t);
    }
    best_last << "\n";
    omega << "\n";
    for (const auto& key : row_order) {
        best_last << key.first << "," << key.second;
        omega << key.first << "," << key.second;
        for (SltType t : types) {
            const auto& by_type = groups[key];
            const auto it = by_type.find(t);
            if (it == by_type.end()) {
                best_last << ",";
                omega << ",";
                continue;
            }
            const MetricRecord agg = aggregate_over_slts(it->second);
            best_last << "," << table_cell(agg.q_best) << "/" << table_cell(agg.q_last);
            omega << "," << table_cell(agg.omega_all);
        }
        best_last << "\n";
        omega << "\n";
    }
    emit("best_last.csv", best_last.str());
    emit("omega.csv", omega.str());

    std::ostringstream txt;
    txt << "results: " << summary.results.size() << "\n";
    for (const auto& id : summary.results)
        txt << "  " << id << "\n";
    txt << "files:\n";
    for (const auto& f : summary.files)
        txt << "  " << f << "\n";
    txt << "warnings: " << summary.warnings.size() << "\n";
    for (const auto& w : summary.warnings)
        txt << "  " << w << "\n";
    write_text(out_dir / "report.txt", txt.str());
    summary.files.push_back("report.txt");
    return summary;
}

}  // namespace cfbench
