#include "cfbench/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cfbench/errors.hpp"

namespace cfbench {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::uint64_t kClassSelectionTag = 0xC1A55;

class Checker {
public:
    void fail(const std::string& path, const std::string& message) {
        problems.push_back(path + ": " + message);
    }

    bool object(const Json& j, const std::string& path) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        return true;
    }

    void known_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, v] : j.items())
            if (!allowed.contains(k))
                fail(path + "." + k, "unknown key");
    }

    const Json* required(const Json& j, const std::string& path, const char* key) {
        if (!j.contains(key)) {
            fail(path + "." + key, "missing required key");
            return nullptr;
        }
        return &j[key];
    }

    const Json* optional(const Json& j, const char* key) {
        return j.contains(key) ? &j[key] : nullptr;
    }

    std::optional<std::string> string(const Json& j, const std::string& path) {
        if (!j.is_string()) {
            fail(path, "expected a string");
            return std::nullopt;
        }
        return j.get<std::string>();
    }

    std::optional<std::uint64_t> unsigned_int(const Json& j, const std::string& path,
                                              std::uint64_t min = 0) {
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
            fail(path, "expected a nonnegative integer");
            return std::nullopt;
        }
        const auto v = j.get<std::uint64_t>();
        if (v < min) {
            fail(path, "must be at least " + std::to_string(min));
            return std::nullopt;
        }
        return v;
    }

    std::optional<double> number(const Json& j, const std::string& path) {
        if (!j.is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        return j.get<double>();
    }

    std::optional<double> positive(const Json& j, const std::string& path) {
        auto v = number(j, path);
        if (v && !(*v > 0.0)) {
            fail(path, "must be positive");
            return std::nullopt;
        }
        return v;
    }

    std::optional<bool> boolean(const Json& j, const std::string& path) {
        if (!j.is_boolean()) {
            fail(path, "expected true or false");
            return std::nullopt;
        }
        return j.get<bool>();
    }

    template <typename T, typename F>
    std::optional<std::vector<T>> list(const Json& j, const std::string& path, F&& item) {
        if (!j.is_array() || j.empty()) {
            fail(path, "expected a non-empty array");
            return std::nullopt;
        }
        std::vector<T> out;
        bool ok = true;
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto v = item(j[i], path + "[" + std::to_string(i) + "]");
            if (v)
                out.push_back(*v);
            else
                ok = false;
        }
        if (!ok)
            return std::nullopt;
        return out;
    }

    std::vector<std::string> problems;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() ? p : base / p;
}

void parse_grid(Checker& c, const Json& j, GridOptions& grid) {
    const std::string path = "$.grid";
    if (!c.object(j, path))
        return;
    c.known_keys(j, path, {"layers", "widths", "eps1", "eps2", "epochs", "batch_size"});
    auto count = [&](const Json& v, const std::string& p) -> std::optional<std::size_t> {
        return c.unsigned_int(v, p, 1);
    };
    auto rate = [&](const Json& v, const std::string& p) { return c.positive(v, p); };
    if (const Json* v = c.optional(j, "layers"))
        if (auto l = c.list<std::size_t>(*v, path + ".layers", count))
            grid.layers = *l;
    if (const Json* v = c.optional(j, "widths"))
        if (auto l = c.list<std::size_t>(*v, path + ".widths", count))
            grid.widths = *l;
    if (const Json* v = c.optional(j, "eps1"))
        if (auto l = c.list<double>(*v, path + ".eps1", rate))
            grid.eps1 = *l;
    if (const Json* v = c.optional(j, "eps2"))
        if (auto l = c.list<double>(*v, path + ".eps2", rate))
            grid.eps2 = *l;
    if (const Json* v = c.optional(j, "epochs"))
        if (auto n = c.unsigned_int(*v, path + ".epochs", 1))
            grid.epochs = *n;
    if (const Json* v = c.optional(j, "batch_size"))
        if (auto n = c.unsigned_int(*v, path + ".batch_size", 1))
            grid.batch_size = *n;
}

void parse_seeds(Checker& c, const Json& j, Seeds& seeds) {
    const std::string path = "$.seeds";
    if (!c.object(j, path))
        return;
    c.known_keys(j, path, {"init", "shuffle", "dropout", "permutation", "fisher"});
    const std::pair<const char*, std::uint64_t*> fields[] = {{"init", &seeds.init},
                                                              {"shuffle", &seeds.shuffle},
                                                              {"dropout", &seeds.dropout},
                                                              {"permutation", &seeds.permutation},
                                                              {"fisher", &seeds.fisher}};
    for (const auto& [key, target] : fields)
        if (const Json* v = c.required(j, path, key))
            if (auto n = c.unsigned_int(*v, path + "." + key))
                *target = *n;
}

void require_file(Checker& c, const fs::path& p, const std::string& path) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec))
        c.fail(path, "file not found: " + p.string());
}

void parse_dataset(Checker& c, const Json& j, const ManifestContext& ctx, DataSource& ds) {
    const std::string path = "$.dataset";
    if (!c.object(j, path))
        return;
    const fs::path base = ctx.data_dir.value_or(ctx.manifest_dir);
    if (const Json* v = c.required(j, path, "name"))
        if (auto s = c.string(*v, path + ".name")) {
            if (s->empty())
                c.fail(path + ".name", "must not be empty");
            ds.name = *s;
        }
    const Json* fmt = c.required(j, path, "format");
    std::optional<std::string> format = fmt ? c.string(*fmt, path + ".format") : std::nullopt;
    if (!format)
        return;

    auto file = [&](const char* key, fs::path& target) {
        if (const Json* v = c.required(j, path, key))
            if (auto s = c.string(*v, path + "." + key)) {
                target = resolve(*s, base);
                require_file(c, target, path + "." + key);
            }
    };

    if (*format == "idx") {
        ds.format = DataFormat::Idx;
        c.known_keys(j, path,
                     {"name", "format", "train_images", "train_labels", "test_images", "test_labels"});
        file("train_images", ds.train_images);
        file("train_labels", ds.train_labels);
        file("test_images", ds.test_images);
        file("test_labels", ds.test_labels);
    } else if (*format == "csv") {
        ds.format = DataFormat::Csv;
        c.known_keys(j, path, {"name", "format", "train", "test", "height", "width", "channels"});
        file("train", ds.train_csv);
        file("test", ds.test_csv);
        const bool any = j.contains("height") || j.contains("width") || j.contains("channels");
        if (any) {
            InputDims d;
            bool ok = true;
            for (auto [key, target] : {std::pair{"height", &d.height}, std::pair{"width", &d.width},
                                       std::pair{"channels", &d.channels}}) {
                const Json* v = c.required(j, path, key);
                auto n = v ? c.unsigned_int(*v, path + "." + key, 1) : std::nullopt;
                if (n)
                    *target = *n;
                else
                    ok = false;
            }
            if (ok)
                ds.csv_dims = d;
        }
    } else if (*format == "synthetic") {
        ds.format = DataFormat::Synthetic;
        c.known_keys(j, path,
                     {"name", "format", "seed", "n_per_class", "n_test_per_class", "dims",
                      "separation", "cluster_std"});
        if (const Json* v = c.required(j, path, "seed"))
            if (auto n = c.unsigned_int(*v, path + ".seed"))
                ds.blobs_seed = *n;
        if (const Json* v = c.optional(j, "n_per_class"))
            if (auto n = c.unsigned_int(*v, path + ".n_per_class", 1))
                ds.blobs.n_per_class = *n;
        if (const Json* v = c.optional(j, "n_test_per_class"))
            if (auto n = c.unsigned_int(*v, path + ".n_test_per_class", 1))
                ds.blobs_test_per_class = *n;
        if (const Json* v = c.optional(j, "dims"))
            if (auto n = c.unsigned_int(*v, path + ".dims", 1))
                ds.blobs.dims = *n;
        if (const Json* v = c.optional(j, "separation"))
            if (auto x = c.positive(*v, path + ".separation"))
                ds.blobs.separation = *x;
        if (const Json* v = c.optional(j, "cluster_std"))
            if (auto x = c.positive(*v, path + ".cluster_std"))
                ds.blobs.cluster_std = *x;
    } else {
        c.fail(path + ".format", "expected \"idx\", \"csv\" or \"synthetic\"");
    }
}

void parse_slts(Checker& c, const Json& j, std::vector<SltSpec>& slts) {
    const std::string path = "$.slts";
    if (!j.is_array() || j.empty()) {
        c.fail(path, "expected a non-empty array of task names");
        return;
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        auto name = c.string(j[i], p);
        if (!name)
            continue;
        std::vector<SltSpec> found;
        try {
            if (*name == "D5-5" || *name == "D9-1" || *name == "all")
                found = list_slts(*name);
            else
                found.push_back(make_slt(*name));
        } catch (const ConfigError&) {
            c.fail(p, "unknown task '" + *name + "'");
            continue;
        }
        for (auto& s : found) {
            if (!seen.insert(s.name).second) {
                c.fail(p, "task " + s.name + " listed twice");
                continue;
            }
            slts.push_back(std::move(s));
        }
    }
}

}  // namespace

Manifest parse_manifest(const Json& doc, const ManifestContext& ctx) {
    Checker c;
    Manifest m;
    if (!c.object(doc, "$"))
        throw ManifestError(c.problems);
    m.echo = doc;
    c.known_keys(doc, "$",
                 {"schema_version", "model", "dataset", "slts", "output_dir", "seeds", "grid",
                  "eval_every_batches", "fisher_samples", "caps", "ewc", "imm", "checkpoints"});

    if (const Json* v = c.required(doc, "$", "schema_version"))
        if (auto n = c.unsigned_int(*v, "$.schema_version")) {
            if (*n != static_cast<std::uint64_t>(kManifestSchemaVersion))
                c.fail("$.schema_version", "unsupported version " + std::to_string(*n) +
                                               " (expected " +
                                               std::to_string(kManifestSchemaVersion) + ")");
            m.schema_version = static_cast<int>(*n);
        }
    if (const Json* v = c.required(doc, "$", "model"))
        if (auto s = c.string(*v, "$.model")) {
            try {
                m.model = model_kind_from_string(*s);
            } catch (const ConfigError&) {
                c.fail("$.model", "unknown model kind '" + *s +
                                      "' (expected FC, D-FC, CONV, D-CONV, LWTA, EWC or IMM)");
            }
        }
    if (const Json* v = c.required(doc, "$", "dataset"))
        parse_dataset(c, *v, ctx, m.data);
    if (const Json* v = c.required(doc, "$", "slts"))
        parse_slts(c, *v, m.slts);
    if (const Json* v = c.required(doc, "$", "output_dir"))
        if (auto s = c.string(*v, "$.output_dir")) {
            if (s->empty())
                c.fail("$.output_dir", "must not be empty");
            else
                m.output_dir = resolve(*s, ctx.manifest_dir);
        }
    if (const Json* v = c.required(doc, "$", "seeds"))
        parse_seeds(c, *v, m.protocol.seeds);
    if (const Json* v = c.optional(doc, "grid"))
        parse_grid(c, *v, m.grid);
    if (const Json* v = c.optional(doc, "eval_every_batches"))
        if (auto n = c.unsigned_int(*v, "$.eval_every_batches"))
            m.protocol.eval_every_batches = *n;
    if (const Json* v = c.optional(doc, "fisher_samples"))
        if (auto n = c.unsigned_int(*v, "$.fisher_samples", 1))
            m.protocol.fisher_samples = *n;
    if (const Json* v = c.optional(doc, "checkpoints"))
        if (auto b = c.boolean(*v, "$.checkpoints"))
            m.checkpoints = *b;

    if (const Json* v = c.optional(doc, "caps"); v && c.object(*v, "$.caps")) {
        c.known_keys(*v, "$.caps", {"train_per_class", "test_per_class"});
        if (const Json* x = c.optional(*v, "train_per_class"))
            if (auto n = c.unsigned_int(*x, "$.caps.train_per_class", 1))
                m.train_cap_per_class = *n;
        if (const Json* x = c.optional(*v, "test_per_class"))
            if (auto n = c.unsigned_int(*x, "$.caps.test_per_class", 1))
                m.test_cap_per_class = *n;
    }
    if (const Json* v = c.optional(doc, "ewc"); v && c.object(*v, "$.ewc")) {
        c.known_keys(*v, "$.ewc", {"lambda"});
        if (const Json* x = c.optional(*v, "lambda")) {
            auto l = c.number(*x, "$.ewc.lambda");
            if (l && *l < 0.0)
                c.fail("$.ewc.lambda", "must be nonnegative");
            else if (l)
                m.grid.ewc_lambda = *l;
        }
        if (m.model != ModelKind::EWC)
            c.fail("$.ewc", "only valid for model EWC");
    }
    if (const Json* v = c.optional(doc, "imm"); v && c.object(*v, "$.imm")) {
        c.known_keys(*v, "$.imm", {"transfer", "alpha_grid"});
        if (const Json* x = c.optional(*v, "transfer"))
            if (auto s = c.string(*x, "$.imm.transfer")) {
                try {
                    m.grid.transfer = transfer_mode_from_string(*s);
                } catch (const ConfigError& e) {
                    c.fail("$.imm.transfer", e.what());
                }
            }
        if (const Json* x = c.optional(*v, "alpha_grid")) {
            auto alpha = [&](const Json& a, const std::string& p) -> std::optional<double> {
                auto n = c.number(a, p);
                if (n && !(*n >= 0.0 && *n <= 1.0)) {
                    c.fail(p, "must be in [0, 1]");
                    return std::nullopt;
                }
                return n;
            };
            if (auto l = c.list<double>(*x, "$.imm.alpha_grid", alpha))
                m.protocol.alpha_grid = *l;
        }
        if (m.model != ModelKind::IMM)
            c.fail("$.imm", "only valid for model IMM");
    }

    if (is_conv(m.model) && m.data.format == DataFormat::Synthetic)
        c.fail("$.model", "convolutional models need image data, not synthetic blobs");
    if (!c.problems.empty())
        throw ManifestError(c.problems);

    for (auto& s : m.slts)
        if (s.kind == SltKind::Permutation)
            s.perm_seed_2 = m.protocol.seeds.permutation;
    return m;
}

Manifest load_manifest(const fs::path& path, std::optional<fs::path> data_dir) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ManifestError({path.string() + ": cannot open manifest"});
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ManifestError({path.string() + ": " + e.what()});
    }
    ManifestContext ctx;
    ctx.manifest_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    ctx.data_dir = std::move(data_dir);
    return parse_manifest(doc, ctx);
}

DatasetPair load_manifest_data(const Manifest& manifest) {
    const DataSource& ds = manifest.data;
    DatasetPair raw;
    switch (ds.format) {
        case DataFormat::Idx:
            raw.train = load_idx(ds.train_images, ds.train_labels, Split::Train);
            raw.test = load_idx(ds.test_images, ds.test_labels, Split::Test);
            break;
        case DataFormat::Csv:
            raw.train = load_csv(ds.train_csv, Split::Train, ds.csv_dims);
            raw.test = load_csv(ds.test_csv, Split::Test, ds.csv_dims);
            break;
        case DataFormat::Synthetic: {
            RngStream rng(ds.blobs_seed);
            raw = synthetic_blob_splits(ds.blobs, ds.blobs_test_per_class, rng);
            break;
        }
    }
    RngStream pick(derive_seed(manifest.protocol.seeds.permutation, {kClassSelectionTag}));
    DatasetPair out = select_top_classes(raw, pick).first;
    if (manifest.train_cap_per_class)
        out.train = cap_per_class(out.train, *manifest.train_cap_per_class);
    if (manifest.test_cap_per_class)
        out.test = cap_per_class(out.test, *manifest.test_cap_per_class);
    validate_dataset(out.train);
    validate_dataset(out.test);
    return out;
}

std::vector<ExperimentConfig> experiment_configs(const Manifest& manifest) {
    std::vector<ExperimentConfig> out;
    for (const auto& slt : manifest.slts) {
        ExperimentConfig c;
        c.model = manifest.model;
        c.dataset_name = manifest.data.name;
        c.slt = slt;
        c.grid = manifest.grid;
        c.protocol = manifest.protocol;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace cfbench
