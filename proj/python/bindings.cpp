#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "cfbench/cli.hpp"
#include "cfbench/errors.hpp"
#include "cfbench/manifest.hpp"
#include "cfbench/metrics.hpp"
#include "cfbench/protocol.hpp"
#include "cfbench/records.hpp"
#include "cfbench/slt.hpp"

namespace py = pybind11;
using namespace cfbench;

namespace {

py::object to_python(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

py::dict slt_dict(const SltSpec& s) {
    py::dict d;
    d["name"] = s.name;
    d["type"] = to_string(s.type);
    d["kind"] = s.kind == SltKind::Partition ? "partition" : "permutation";
    d["d1_classes"] = s.d1_classes;
    d["d2_classes"] = s.d2_classes;
    return d;
}

SltType type_of(const std::string& name) { return slt_type_from_string(name); }

}  // namespace

PYBIND11_MODULE(_cfbench, m) {
    m.doc() = "Catastrophic-forgetting benchmark core";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("list_slts", [](const std::string& filter) {
        py::list out;
        for (const auto& s : list_slts(filter))
            out.append(slt_dict(s));
        return out;
    }, py::arg("filter") = "all", "Task definitions, optionally filtered by type.");
    m.def("make_slt", [](const std::string& name) { return slt_dict(make_slt(name)); },
          py::arg("name"));

    m.def("quality_from_curve", [](const std::vector<double>& curve, const std::string& mode) {
        if (mode != "best" && mode != "last")
            throw ConfigError("mode must be 'best' or 'last'");
        return quality_from_curve(curve, mode == "best" ? QualityMode::Best : QualityMode::Last);
    }, py::arg("curve"), py::arg("mode"));
    m.def("omega_all", &omega_all, py::arg("q_best"), py::arg("baseline"));
    m.def("classify_cf", [](double q, const std::string& type) {
        return to_string(classify_cf(q, type_of(type)));
    }, py::arg("q"), py::arg("slt_type"));
    m.def("cf_threshold", [](const std::string& type) { return cf_threshold(type_of(type)); },
          py::arg("slt_type"));

    m.def("experiments", [](const std::filesystem::path& manifest, std::optional<std::size_t> jobs) {
        Manifest mf = load_manifest(manifest);
        if (jobs)
            mf.protocol.jobs = *jobs;
        const DatasetPair data = load_manifest_data(mf);
        py::list out;
        for (const auto& config : experiment_configs(mf)) {
            ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(config, data);
            }
            out.append(to_python(result_to_json(res, mf.echo)));
        }
        return out;
    }, py::arg("manifest"), py::arg("jobs") = py::none(),
       "Runs every task of a manifest in memory and returns the result documents.");

    m.def("run", [](const std::filesystem::path& manifest, std::optional<std::size_t> jobs,
                    std::optional<std::size_t> eval_every_batches,
                    std::optional<std::filesystem::path> data_dir,
                    std::optional<std::filesystem::path> output_dir) {
        RunOptions opt{jobs, eval_every_batches, data_dir, output_dir};
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cmd_run(manifest, opt, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("manifest"), py::arg("jobs") = py::none(), py::arg("eval_every_batches") = py::none(),
       py::arg("data_dir") = py::none(), py::arg("output_dir") = py::none(),
       "Same as `cfbench run`; returns (exit_code, stdout, stderr).");

    m.def("report", [](const std::filesystem::path& dir, std::optional<std::filesystem::path> out_dir) {
        std::ostringstream out, err;
        const int code = cmd_report(dir, out_dir, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("results_dir"), py::arg("out_dir") = py::none(),
       "Same as `cfbench report`; returns (exit_code, stdout, stderr).");
}
