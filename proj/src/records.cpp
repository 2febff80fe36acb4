#include "cfbench/records.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "cfbench/errors.hpp"

namespace cfbench {

namespace {

using Json = nlohmann::ordered_json;

Json opt_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json slt_to_json(const SltSpec& s) {
    Json j;
    j["name"] = s.name;
    j["type"] = to_string(s.type);
    j["kind"] = s.kind == SltKind::Partition ? "partition" : "permutation";
    j["d1_classes"] = s.d1_classes;
    j["d2_classes"] = s.d2_classes;
    j["perm_seed_1"] = s.perm_seed_1 ? Json(*s.perm_seed_1) : Json(nullptr);
    j["perm_seed_2"] = s.perm_seed_2 ? Json(*s.perm_seed_2) : Json(nullptr);
    return j;
}

Json params_to_json(const HyperParams& hp) {
    Json j;
    j["model"] = to_string(hp.model);
    if (!is_conv(hp.model)) {
        j["layers"] = hp.layers;
        j["width"] = hp.width;
    }
    j["eps1"] = hp.eps1;
    j["epochs"] = hp.epochs;
    j["batch_size"] = hp.batch_size;
    j["momentum"] = hp.momentum;
    if (hp.model == ModelKind::DFC || hp.model == ModelKind::DCONV) {
        j["input_drop"] = hp.input_drop;
        j["hidden_drop"] = hp.hidden_drop;
    }
    if (hp.model == ModelKind::LWTA)
        j["lwta_block"] = hp.lwta_block;
    if (hp.model == ModelKind::EWC)
        j["ewc_lambda"] = hp.ewc_lambda ? Json(*hp.ewc_lambda) : Json("1/eps2");
    if (hp.model == ModelKind::IMM) {
        j["transfer"] = to_string(hp.transfer);
        j["l2_strength"] = hp.l2_strength;
    }
    return j;
}

Json run_to_json(const RunRecord& r) {
    Json j;
    j["phase"] = r.phase;
    j["grid_index"] = r.grid_index;
    j["eps2"] = opt_number(r.eps2);
    j["steps_per_epoch"] = r.steps_per_epoch;
    j["total_steps"] = r.total_steps;
    j["failed"] = r.failed;
    j["failure"] = r.failure;
    Json curve = Json::array();
    for (const auto& p : r.curve) {
        Json q;
        q["step"] = p.step;
        q["epoch"] = p.epoch;
        q["acc_d1"] = opt_number(p.acc_d1);
        q["acc_d2"] = opt_number(p.acc_d2);
        q["acc_joint"] = opt_number(p.acc_joint);
        curve.push_back(std::move(q));
    }
    j["curve"] = std::move(curve);
    return j;
}

Json tensor_to_json(const Tensor& t) {
    Json j;
    j["shape"] = t.shape;
    j["data"] = t.data;
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("data").get<std::vector<double>>());
}

std::string layer_kind_name(LayerKind k) { return to_string(k); }

LayerKind layer_kind_from_name(const std::string& s) {
    for (LayerKind k : {LayerKind::Dense, LayerKind::Conv2d, LayerKind::MaxPool2d, LayerKind::Relu,
                        LayerKind::Lwta, LayerKind::Dropout, LayerKind::SoftmaxReadout})
        if (to_string(k) == s)
            return k;
    throw ConfigError("unknown layer kind '" + s + "'");
}

}  // namespace

std::string experiment_id(const std::string& dataset, ModelKind model, const std::string& slt) {
    std::string id = dataset + "_" + to_string(model) + "_" + slt;
    for (char& c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            c = '-';
    return id;
}

std::string experiment_id(const ExperimentResult& r) {
    return experiment_id(r.dataset_name, r.model, r.slt.name);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string table_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    if (s.rfind("0.", 0) == 0)
        s.erase(0, 1);
    return s;
}

Json result_to_json(const ExperimentResult& r, const Json& manifest_echo) {
    Json j;
    j["schema_version"] = kRecordSchemaVersion;
    j["tool"] = "cfbench";
    j["tool_version"] = kToolVersion;
    j["experiment"] = experiment_id(r);
    j["manifest"] = manifest_echo;
    j["dataset"] = r.dataset_name;
    j["model"] = to_string(r.model);
    j["slt"] = slt_to_json(r.slt);
    j["test_sizes"] = {{"d1", r.d1_test_size}, {"d2", r.d2_test_size}, {"joint", r.joint_test_size}};

    Json points = Json::array();
    for (const auto& p : r.grid.points)
        points.push_back(params_to_json(p));
    j["grid"] = {{"points", points}, {"eps2", r.grid.eps2}};
    j["selection"] = {{"grid_index", r.selected_index},
                      {"step", r.selected_step},
                      {"d1_accuracy", r.selected_accuracy}};

    Json runs = Json::array();
    for (const auto& run : r.phase1)
        runs.push_back(run_to_json(run));
    for (const auto& run : r.phase2)
        runs.push_back(run_to_json(run));
    runs.push_back(run_to_json(r.baseline_run));
    j["runs"] = std::move(runs);
    j["baseline"] = r.baseline;

    Json q;
    q["q_best"] = r.quality.q_best;
    q["q_last"] = r.quality.q_last;
    q["eps2_best"] = opt_number(r.quality.eps2_best);
    q["eps2_last"] = opt_number(r.quality.eps2_last);
    q["alpha"] = opt_number(r.quality.alpha);
    q["variant"] = r.quality.variant ? Json(to_string(*r.quality.variant)) : Json(nullptr);
    j["quality"] = std::move(q);

    if (r.imm) {
        Json t;
        t["alphas"] = r.imm->alphas;
        t["mean"] = r.imm->mean_accuracy;
        t["mode"] = r.imm->mode_accuracy;
        t["eps2"] = r.imm->eps2;
        t["model1_joint"] = r.imm->model1_joint;
        t["model2_joint"] = r.imm->model2_joint;
        j["imm"] = std::move(t);
    } else {
        j["imm"] = nullptr;
    }

    const MetricRecord& m = r.metric;
    j["metric"] = {{"dataset", m.dataset},
                   {"model", m.model},
                   {"slt_type", to_string(m.slt_type)},
                   {"slt_variant", m.slt_variant},
                   {"q_best", m.q_best},
                   {"q_last", m.q_last},
                   {"baseline", m.baseline},
                   {"omega_all", m.omega_all},
                   {"cf_best", to_string(m.cf_best)},
                   {"cf_last", to_string(m.cf_last)}};
    j["constraint_notes"] = r.constraint_notes;
    return j;
}

std::vector<std::string> record_lines(const ExperimentResult& r) {
    const std::string id = experiment_id(r);
    std::vector<std::string> lines;
    auto emit = [&](const std::string& phase, std::ptrdiff_t grid_index,
                    std::optional<double> eps2, std::optional<double> alpha,
                    std::optional<std::string> variant, std::optional<std::size_t> step,
                    std::optional<double> epoch, const char* split, double acc, bool failed) {
        Json j;
        j["schema"] = kRecordSchemaVersion;
        j["experiment"] = id;
        j["phase"] = phase;
        j["grid_index"] = grid_index >= 0 ? Json(grid_index) : Json(nullptr);
        j["eps2"] = opt_number(eps2);
        j["alpha"] = opt_number(alpha);
        j["variant"] = variant ? Json(*variant) : Json(nullptr);
        j["step"] = step ? Json(*step) : Json(nullptr);
        j["epoch"] = opt_number(epoch);
        j["split"] = split;
        j["accuracy"] = acc;
        j["failed"] = failed;
        lines.push_back(j.dump());
    };
    auto emit_run = [&](const RunRecord& run) {
        const std::ptrdiff_t gi =
            run.phase == "phase1" ? static_cast<std::ptrdiff_t>(run.grid_index) : -1;
        for (const auto& p : run.curve) {
            if (p.acc_d1)
                emit(run.phase, gi, run.eps2, {}, {}, p.step, p.epoch, "d1", *p.acc_d1, run.failed);
            if (p.acc_d2)
                emit(run.phase, gi, run.eps2, {}, {}, p.step, p.epoch, "d2", *p.acc_d2, run.failed);
            if (p.acc_joint)
                emit(run.phase, gi, run.eps2, {}, {}, p.step, p.epoch, "joint", *p.acc_joint,
                     run.failed);
        }
    };
    for (const auto& run : r.phase1)
        emit_run(run);
    for (const auto& run : r.phase2)
        emit_run(run);
    emit_run(r.baseline_run);
    if (r.imm)
        for (std::size_t i = 0; i < r.imm->alphas.size(); ++i) {
            emit("imm", -1, r.imm->eps2, r.imm->alphas[i], "mean", {}, {}, "joint",
                 r.imm->mean_accuracy[i], false);
            emit("imm", -1, r.imm->eps2, r.imm->alphas[i], "mode", {}, {}, "joint",
                 r.imm->mode_accuracy[i], false);
        }
    return lines;
}

std::string summary_csv_header() {
    return "dataset,model,slt,slt_type,q_best,q_last,baseline,omega_all,cf_best,cf_last,"
           "eps2_best,eps2_last,alpha,variant,selected_grid_index,selected_step";
}

std::string summary_csv_row(const ExperimentResult& r) {
    const MetricRecord& m = r.metric;
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string row;
    row += m.dataset + "," + m.model + "," + r.slt.name + "," + to_string(m.slt_type) + ",";
    row += format_double(m.q_best) + "," + format_double(m.q_last) + ",";
    row += format_double(m.baseline) + "," + format_double(m.omega_all) + ",";
    row += to_string(m.cf_best) + "," + to_string(m.cf_last) + ",";
    row += opt(r.quality.eps2_best) + "," + opt(r.quality.eps2_last) + ",";
    row += opt(r.quality.alpha) + ",";
    row += (r.quality.variant ? to_string(*r.quality.variant) : std::string()) + ",";
    row += std::to_string(r.selected_index) + "," + std::to_string(r.selected_step);
    return row;
}

Json layer_to_json(const LayerSpec& l) {
    Json j;
    j["kind"] = layer_kind_name(l.kind);
    j["width"] = l.width;
    j["filters"] = l.filters;
    j["filter_size"] = l.filter_size;
    j["pool_size"] = l.pool_size;
    j["stride"] = l.stride;
    j["block_size"] = l.block_size;
    j["drop_rate"] = l.drop_rate;
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec l;
    l.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    l.width = j.at("width").get<std::size_t>();
    l.filters = j.at("filters").get<std::size_t>();
    l.filter_size = j.at("filter_size").get<std::size_t>();
    l.pool_size = j.at("pool_size").get<std::size_t>();
    l.stride = j.at("stride").get<std::size_t>();
    l.block_size = j.at("block_size").get<std::size_t>();
    l.drop_rate = j.at("drop_rate").get<double>();
    return l;
}

Json checkpoint_to_json(const Network& model, const std::optional<FisherDiagonal>& fisher) {
    Json j;
    j["schema_version"] = kRecordSchemaVersion;
    const InputDims d = model.input_dims();
    j["input"] = {{"height", d.height}, {"width", d.width}, {"channels", d.channels}};
    Json layers = Json::array();
    for (const auto& l : model.layers())
        layers.push_back(layer_to_json(l));
    j["layers"] = std::move(layers);
    Json params = Json::array();
    for (const auto& t : model.params())
        params.push_back(tensor_to_json(t));
    j["params"] = std::move(params);
    if (fisher) {
        Json f = Json::array();
        for (const auto& t : fisher->values)
            f.push_back(tensor_to_json(t));
        j["fisher"] = {{"samples", fisher->samples}, {"values", f}};
    } else {
        j["fisher"] = nullptr;
    }
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
    try {
        const auto& in = doc.at("input");
        const InputDims dims{in.at("height").get<std::size_t>(), in.at("width").get<std::size_t>(),
                             in.at("channels").get<std::size_t>()};
        std::vector<LayerSpec> layers;
        for (const auto& l : doc.at("layers"))
            layers.push_back(layer_from_json(l));
        RngStream unused(0);
        Network net = build_network(layers, dims, unused);
        ParamSet params;
        for (const auto& t : doc.at("params"))
            params.push_back(tensor_from_json(t));
        net.set_params(std::move(params));
        Checkpoint cp{std::move(net), std::nullopt};
        if (!doc.at("fisher").is_null()) {
            FisherDiagonal f;
            f.samples = doc["fisher"].at("samples").get<std::size_t>();
            for (const auto& t : doc["fisher"].at("values"))
                f.values.push_back(tensor_from_json(t));
            if (!same_shapes(f.values, cp.model.params()))
                throw ConfigError("checkpoint Fisher shapes do not match the parameters");
            cp.fisher = std::move(f);
        }
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace cfbench
