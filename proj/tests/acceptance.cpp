// Acceptance gate: runs the eight acceptance criteria and prints one
// PASS/FAIL line per criterion. Usage: cfbench_acceptance [criterion ...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfbench/continual.hpp"
#include "cfbench/manifest.hpp"
#include "cfbench/metrics.hpp"
#include "cfbench/protocol.hpp"
#include "cfbench/records.hpp"
#include "support.hpp"

using namespace cfbench;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

// ---- MNIST experiments (criteria 1-6) ----

class MnistRuns {
public:
    explicit MnistRuns(fs::path dir) : dir_(std::move(dir)) {}

    struct Run {
        ExperimentResult result;
        double seconds = 0.0;
    };

    const Run& get(ModelKind model, const std::string& slt) {
        const auto key = std::pair(to_string(model), slt);
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        const Manifest& m = manifest(model, slt);
        const auto start = Clock::now();
        ExperimentResult res = run_experiment(experiment_configs(m).front(), data(m));
        Run run{std::move(res), seconds_since(start)};
        std::printf("  [run] %s %s: q_best %.4f q_last %.4f baseline %.4f (%.1f s)\n",
                    key.first.c_str(), slt.c_str(), run.result.quality.q_best,
                    run.result.quality.q_last, run.result.baseline, run.seconds);
        std::fflush(stdout);
        return cache_.emplace(key, std::move(run)).first->second;
    }

private:
    const Manifest& manifest(ModelKind model, const std::string& slt) {
        nlohmann::ordered_json doc = {
            {"schema_version", 1},
            {"model", to_string(model)},
            {"dataset",
             {{"name", "MNIST"},
              {"format", "idx"},
              {"train_images", (dir_ / "train-images-idx3-ubyte.gz").string()},
              {"train_labels", (dir_ / "train-labels-idx1-ubyte.gz").string()},
              {"test_images", (dir_ / "t10k-images-idx3-ubyte.gz").string()},
              {"test_labels", (dir_ / "t10k-labels-idx1-ubyte.gz").string()}}},
            {"slts", {slt}},
            {"output_dir", "unused"},
            {"seeds", {{"init", 1}, {"shuffle", 2}, {"dropout", 3}, {"permutation", 4}, {"fisher", 5}}},
            {"grid",
             {{"layers", {2}},
              {"widths", {200}},
              {"eps1", {0.01}},
              {"eps2", {0.001, 0.0001}},
              {"epochs", 10},
              {"batch_size", 100}}},
            {"caps", {{"train_per_class", 2000}}},
        };
        manifests_.push_back(parse_manifest(doc, ManifestContext{fs::current_path(), std::nullopt}));
        return manifests_.back();
    }

    const DatasetPair& data(const Manifest& m) {
        if (!data_)
            data_ = load_manifest_data(m);
        return *data_;
    }

    fs::path dir_;
    std::vector<Manifest> manifests_;
    std::optional<DatasetPair> data_;
    std::map<std::pair<std::string, std::string>, Run> cache_;
};

Outcome criterion1(MnistRuns& runs) {
    const auto& r = runs.get(ModelKind::FC, "D9-1a");
    const double qb = r.result.quality.q_best, ql = r.result.quality.q_last;
    const bool ok = ql >= 0.05 && ql <= 0.20 && qb >= 0.80 && qb <= 0.95 && r.seconds < 15 * 60;
    return {ok, "FC D9-1a q_last " + fmt("%.4f", ql) + " in [0.05, 0.20], q_best " +
                    fmt("%.4f", qb) + " in [0.80, 0.95], " + fmt("%.1f", r.seconds) + " s < 900 s"};
}

Outcome criterion2(MnistRuns& runs) {
    const auto& r = runs.get(ModelKind::FC, "DP10-10");
    const double qb = r.result.quality.q_best, ql = r.result.quality.q_last;
    const bool ok = qb >= 0.93 && ql >= 0.93 && r.seconds < 15 * 60;
    return {ok, "FC DP10-10 q_best " + fmt("%.4f", qb) + " >= 0.93, q_last " + fmt("%.4f", ql) +
                    " >= 0.93, " + fmt("%.1f", r.seconds) + " s < 900 s"};
}

Outcome criterion3(MnistRuns& runs) {
    const auto& e = runs.get(ModelKind::EWC, "D9-1a");
    const auto& f = runs.get(ModelKind::FC, "D9-1a");
    const double qb = e.result.quality.q_best, ql = e.result.quality.q_last;
    const double gain = ql - f.result.quality.q_last;
    const bool ok = qb >= 0.90 && ql >= 0.45 && gain >= 0.25 && e.seconds < 25 * 60;
    return {ok, "EWC D9-1a q_best " + fmt("%.4f", qb) + " >= 0.90, q_last " + fmt("%.4f", ql) +
                    " >= 0.45, q_last gain over FC " + fmt("%.4f", gain) + " >= 0.25, " +
                    fmt("%.1f", e.seconds) + " s < 1500 s"};
}

Outcome criterion4(MnistRuns& runs) {
    const auto& e = runs.get(ModelKind::EWC, "D5-5a");
    const double qb = e.result.quality.q_best, ql = e.result.quality.q_last;
    const bool ok = qb <= 0.65 && ql <= 0.50 && e.seconds < 25 * 60;
    return {ok, "EWC D5-5a q_best " + fmt("%.4f", qb) + " <= 0.65, q_last " + fmt("%.4f", ql) +
                    " <= 0.50 (" + to_string(classify_cf(ql, SltType::D5_5)) + "), " +
                    fmt("%.1f", e.seconds) + " s < 1500 s"};
}

Outcome criterion5(MnistRuns& runs) {
    const auto& r = runs.get(ModelKind::IMM, "D9-1a");
    const ImmTuning& t = *r.result.imm;
    const auto& acc = t.mode_accuracy;
    const auto best = std::max_element(acc.begin(), acc.end());
    const double alpha = t.alphas[static_cast<std::size_t>(best - acc.begin())];
    const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
    const bool ok = *best >= 0.75 && *hi > *lo && alpha > 0.0 && alpha < 1.0 && r.seconds < 40 * 60;
    return {ok, "IMM (weight transfer) D9-1a mode best joint " + fmt("%.4f", *best) +
                    " >= 0.75 at alpha " + fmt("%.2f", alpha) + " in (0, 1), curve range [" +
                    fmt("%.4f", *lo) + ", " + fmt("%.4f", *hi) + "], " + fmt("%.1f", r.seconds) +
                    " s < 2400 s"};
}

Outcome criterion6(MnistRuns& runs) {
    const auto& r = runs.get(ModelKind::FC, "D9-1a");
    return {r.result.baseline >= 0.95,
            "FC D9-1a baseline joint accuracy " + fmt("%.4f", r.result.baseline) + " >= 0.95"};
}

// ---- criterion 7: metric functions against brute force ----

double brute_best(const std::vector<double>& c) {
    double m = c[0];
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i] > m)
            m = c[i];
    return m;
}

bool brute_cf(double q, SltType t) {
    const double threshold = t == SltType::D9_1 ? 0.9 : 0.5;
    return q < threshold;
}

Outcome criterion7() {
    RngStream rng(20240607);
    std::size_t mismatches = 0;
    const auto all = list_slts("all");
    for (int set = 0; set < 100; ++set) {
        const SltType type = std::vector{SltType::D5_5, SltType::D9_1, SltType::DP10_10}[rng.below(3)];
        std::vector<SltSpec> variants;
        for (const auto& s : all)
            if (s.type == type)
                variants.push_back(s);
        std::vector<MetricRecord> records;
        double min_best = 2.0, min_last = 2.0, min_base = 2.0, min_omega = 1e9;
        for (const auto& v : variants) {
            std::vector<double> curve(1 + rng.below(40));
            for (auto& x : curve)
                x = std::round(rng.uniform() * 1000.0) / 1000.0;
            const double base = 0.05 + 0.95 * rng.uniform();
            const double best = brute_best(curve);
            const double last = curve[curve.size() - 1];
            if (quality_from_curve(curve, QualityMode::Best) != best ||
                quality_from_curve(curve, QualityMode::Last) != last)
                ++mismatches;
            const double omega = best / base;
            if (omega_all(best, base) != omega)
                ++mismatches;
            for (double q : {best, last, rng.uniform()})
                if ((classify_cf(q, type) == CfFlag::CF) != brute_cf(q, type))
                    ++mismatches;
            records.push_back(make_metric_record("synthetic", "FC", v, best, last, base));
            min_best = std::min(min_best, best);
            min_last = std::min(min_last, last);
            min_base = std::min(min_base, base);
            min_omega = std::min(min_omega, omega);
        }
        const MetricRecord agg = aggregate_over_slts(records);
        if (agg.q_best != min_best || agg.q_last != min_last || agg.baseline != min_base ||
            agg.omega_all != min_best / min_base || agg.omega_all_min_per_slt != min_omega ||
            (agg.cf_best == CfFlag::CF) != brute_cf(min_best, type) ||
            (agg.cf_last == CfFlag::CF) != brute_cf(min_last, type))
            ++mismatches;
    }
    const double cell = omega_all(0.88, 0.98);
    const bool ok = mismatches == 0 && std::abs(cell - 0.90) <= 0.01;
    return {ok, std::to_string(mismatches) + " mismatches over 100 curve sets, omega(.88, .98) = " +
                    fmt("%.4f", cell)};
}

// ---- criterion 8: property suites ----

struct Check {
    std::string name;
    bool ok = false;
    std::string note;
};

Check gradient_checks() {
    RngStream rng(3);
    using testing::check_gradients;
    using testing::random_labels;
    using testing::random_tensor;
    struct Case {
        const char* name;
        std::vector<LayerSpec> layers;
        InputDims dims;
        Mode mode;
    };
    const std::vector<Case> cases{
        {"dense+relu", fc_layers(2, 6), {1, 5, 1}, Mode::Eval},
        {"lwta", lwta_layers(2, 8, 2), {1, 5, 1}, Mode::Eval},
        {"dropout", dropout_fc_layers(2, 10, 0.2, 0.5), {1, 6, 1}, Mode::Train},
        {"conv+relu+maxpool",
         {LayerSpec::conv2d(3, 3), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2), LayerSpec::dense(10),
          LayerSpec::softmax_readout()},
         {6, 6, 2},
         Mode::Eval},
        {"conv stack with dropout",
         {LayerSpec::dropout(0.5), LayerSpec::conv2d(2, 5), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
          LayerSpec::conv2d(3, 5), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2), LayerSpec::dropout(0.5),
          LayerSpec::dense(12), LayerSpec::relu(), LayerSpec::dense(10), LayerSpec::softmax_readout()},
         {8, 8, 1},
         Mode::Train},
    };
    bool ok = true;
    double worst = 0.0;
    std::size_t min_coords = SIZE_MAX;
    for (const auto& c : cases) {
        const Network net = build_network(c.layers, c.dims, rng);
        const Tensor x = random_tensor({3, c.dims.height, c.dims.width, c.dims.channels}, rng);
        const auto g = check_gradients(net, x, random_labels(3, rng), {}, c.mode, RngStream(17));
        worst = std::max(worst, g.max_rel_err);
        min_coords = std::min(min_coords, g.coords);
        ok = ok && g.coords >= 100 && g.max_rel_err < 1e-4;
    }
    return {"gradient checks", ok,
            "max rel err " + fmt("%.2e", worst) + ", min coords " + std::to_string(min_coords)};
}

Check softmax_normalization() {
    RngStream rng(2);
    const Network net = build_network(fc_layers(2, 16), InputDims{1, 12, 1}, rng);
    double worst = 0.0;
    for (double scale : {1.0, 100.0, 1e4}) {
        const Tensor x = testing::random_tensor({50, 12}, rng, -scale, scale);
        const Tensor p = forward(net, x, Mode::Eval).probabilities;
        for (std::size_t i = 0; i < 50; ++i) {
            double s = 0.0;
            for (double v : p.row(i))
                s += v;
            worst = std::max(worst, std::abs(s - 1.0));
        }
    }
    return {"softmax normalization", worst <= 1e-6, "max |sum - 1| " + fmt("%.2e", worst)};
}

Check lwta_one_winner() {
    RngStream rng(5);
    bool ok = true;
    for (std::size_t block : {2u, 3u, 4u}) {
        const Tensor pre = testing::random_tensor({20, 24}, rng);
        const Tensor out = apply_lwta(pre, block);
        for (std::size_t start = 0; start < pre.size(); start += block) {
            std::size_t winners = 0;
            for (std::size_t j = start; j < start + block; ++j)
                winners += out.data[j] != 0.0;
            ok = ok && winners == 1;
        }
    }
    return {"LWTA one winner per block", ok, ""};
}

Check fisher_nonnegative() {
    const DatasetPair d = testing::easy_blobs(10, 5);
    RngStream init(1), f(2);
    const Network net = build_network(fc_layers(2, 16), d.train.dims(), init);
    const FisherDiagonal fd = estimate_fisher_diagonal(net, d.train, 300, f);
    double lo = 1.0;
    for (const auto& t : fd.values)
        for (double v : t.data)
            lo = std::min(lo, v);
    return {"Fisher nonnegative", lo >= 0.0, "min entry " + fmt("%.2e", lo)};
}

double distance(const ParamSet& a, const ParamSet& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].size(); ++i)
            s = std::max(s, std::abs(a[t].data[i] - b[t].data[i]));
    return s;
}

Check imm_identities() {
    RngStream rng(31), i1(32), i2(33);
    const InputDims dims{1, 6, 1};
    ImmState s;
    s.params1 = build_network(fc_layers(1, 12), dims, i1).params();
    s.params2 = build_network(fc_layers(1, 12), dims, i2).params();
    s.fisher1 = FisherDiagonal{zeros_like(s.params1), 1};
    s.fisher2 = FisherDiagonal{zeros_like(s.params1), 1};
    ImmState unequal = s;
    for (std::size_t t = 0; t < s.params1.size(); ++t)
        for (std::size_t i = 0; i < s.params1[t].size(); ++i) {
            const double f = rng.uniform(0.01, 1.0);
            s.fisher1->values[t].data[i] = s.fisher2->values[t].data[i] = f;
            unequal.fisher1->values[t].data[i] = f;
            unequal.fisher2->values[t].data[i] = rng.uniform(0.01, 1.0);
        }
    double worst = 0.0;
    for (const ImmState* st : {&s, &unequal})
        for (MergeVariant v : {MergeVariant::Mean, MergeVariant::Mode}) {
            worst = std::max(worst, distance(imm_merge(*st, 0.0, v), st->params1));
            worst = std::max(worst, distance(imm_merge(*st, 1.0, v), st->params2));
        }
    for (double a : {0.1, 0.5, 0.9})
        worst = std::max(worst, distance(imm_mode_merge(s, a), imm_mean_merge(s, a)));
    ImmState self = unequal;
    self.params2 = self.params1;
    for (double a : {0.3, 0.7})
        for (MergeVariant v : {MergeVariant::Mean, MergeVariant::Mode})
            worst = std::max(worst, distance(imm_merge(self, a, v), self.params1));
    return {"IMM identities", worst <= 1e-9, "max deviation " + fmt("%.2e", worst)};
}

Check ewc_lambda_zero() {
    const DatasetPair d = testing::easy_blobs(20, 10);
    const SltInstance inst = apply_slt(make_slt("D5-5b"), d);
    RngStream init(1), f(5);
    const Network start = build_network(fc_layers(2, 16), d.train.dims(), init);
    const EwcState state{start.params(), estimate_fisher_diagonal(start, inst.d1.train, 50, f), 0.0};
    TrainOptions opt;
    opt.epochs = 3;
    opt.batch_size = 10;
    Network a = start, b = start;
    RngStream sa(2), da(3), sb(2), db(3);
    const auto la = train_network(a, inst.d2.train, opt, sa, da, {}, {}).losses;
    const auto lb = train_network(b, inst.d2.train, opt, sb, db, make_ewc_penalty(state), {}).losses;
    return {"EWC lambda=0 equals FC", a.params() == b.params() && la == lb, "bitwise parameters"};
}

Check permutation_equivariance() {
    const DatasetPair base = testing::easy_blobs(20, 10);
    const InputDims dims = base.train.dims();
    RngStream pr(12);
    const auto perm = pr.permutation(dims.flat());
    const auto inv_perm_data = [&](const Dataset& ds) {
        Tensor px = ds.images();
        for (std::size_t s = 0; s < ds.size(); ++s)
            for (std::size_t j = 0; j < perm.size(); ++j)
                px.data[s * perm.size() + j] = ds.images().data[s * perm.size() + perm[j]];
        return Dataset(px, std::vector<int>(ds.labels().begin(), ds.labels().end()));
    };
    const Dataset permuted = inv_perm_data(base.train);
    RngStream init(4);
    Network a = build_network(fc_layers(2, 24), dims, init);
    Network b = a;
    const std::size_t out = a.params()[0].dim(1);
    for (std::size_t j = 0; j < perm.size(); ++j)
        for (std::size_t o = 0; o < out; ++o)
            b.params()[0].data[j * out + o] = a.params()[0].data[perm[j] * out + o];
    TrainOptions opt;
    opt.epochs = 5;
    opt.batch_size = 10;
    RngStream sa(2), da(3), sb(2), db(3);
    const auto la = train_network(a, base.train, opt, sa, da, {}, {}).losses;
    const auto lb = train_network(b, permuted, opt, sb, db, {}, {}).losses;
    double worst = la.size() == lb.size() ? 0.0 : 1.0;
    for (std::size_t i = 0; i < std::min(la.size(), lb.size()); ++i)
        worst = std::max(worst, std::abs(la[i] - lb[i]));
    return {"permutation equivariance", worst <= 1e-10,
            "max loss difference " + fmt("%.2e", worst) + " over " + std::to_string(la.size()) +
                " steps"};
}

ExperimentConfig small_config(ModelKind model) {
    ExperimentConfig c;
    c.model = model;
    c.dataset_name = "blobs";
    c.slt = make_slt("D9-1b");
    c.grid.layers = {1, 2};
    c.grid.widths = {16};
    c.grid.eps1 = {model == ModelKind::IMM ? 0.2 : 0.01};
    c.grid.eps2 = {0.001, 0.0001};
    c.grid.epochs = 5;
    c.grid.batch_size = 10;
    c.protocol.fisher_samples = 100;
    return c;
}

Check determinism() {
    const DatasetPair base = testing::easy_blobs(20, 10);
    bool ok = true;
    for (ModelKind m : {ModelKind::DFC, ModelKind::EWC, ModelKind::IMM}) {
        auto bytes = [&] {
            const ExperimentResult r = run_experiment(small_config(m), base);
            std::string s = result_to_json(r, nlohmann::ordered_json::object()).dump();
            for (const auto& l : record_lines(r))
                s += l + "\n";
            return s;
        };
        ok = ok && bytes() == bytes();
    }
    return {"full-experiment determinism", ok, "D-FC, EWC, IMM record bytes"};
}

Check phase1_audit() {
    const DatasetPair base = testing::easy_blobs(20, 10);
    bool ok = true;
    std::size_t reads = 0;
    for (ModelKind m : {ModelKind::FC, ModelKind::EWC, ModelKind::IMM}) {
        AccessLog log;
        run_experiment(small_config(m), base, &log);
        const auto ev = log.events();
        const auto b = std::find(ev.begin(), ev.end(), "begin:phase1");
        const auto e = std::find(ev.begin(), ev.end(), "end:phase1");
        ok = ok && b != ev.end() && e != ev.end() && b < e;
        for (auto it = b; ok && it != e; ++it) {
            if (it == b)
                continue;
            ++reads;
            ok = *it == "read:d1-train" || *it == "read:d1-test";
        }
    }
    return {"D2 untouched during phase 1", ok, std::to_string(reads) + " phase-1 reads, all D1"};
}

Outcome criterion8() {
    const auto start = Clock::now();
    std::vector<std::function<Check()>> suites{gradient_checks,   softmax_normalization,
                                               lwta_one_winner,   fisher_nonnegative,
                                               imm_identities,    ewc_lambda_zero,
                                               permutation_equivariance, determinism,
                                               phase1_audit};
    bool ok = true;
    std::string failed;
    for (const auto& s : suites) {
        const Check c = s();
        std::printf("  [%s] %s%s%s\n", c.ok ? "ok" : "FAILED", c.name.c_str(),
                    c.note.empty() ? "" : ": ", c.note.c_str());
        if (!c.ok) {
            ok = false;
            failed += (failed.empty() ? "" : ", ") + c.name;
        }
    }
    const double secs = seconds_since(start);
    ok = ok && secs < 300.0;
    return {ok, std::to_string(suites.size()) + " property suites" +
                    (failed.empty() ? "" : " (failed: " + failed + ")") + ", " + fmt("%.1f", secs) +
                    " s < 300 s"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::stoi(argv[i]));
    if (selected.empty())
        selected = {1, 2, 3, 4, 5, 6, 7, 8};

    MnistRuns runs(CFBENCH_MNIST_DIR);
    const std::map<int, std::function<Outcome()>> criteria{
        {1, [&] { return criterion1(runs); }}, {2, [&] { return criterion2(runs); }},
        {3, [&] { return criterion3(runs); }}, {4, [&] { return criterion4(runs); }},
        {5, [&] { return criterion5(runs); }}, {6, [&] { return criterion6(runs); }},
        {7, criterion7},                       {8, criterion8},
    };

    std::vector<std::pair<int, Outcome>> results;
    for (int id : selected) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::fprintf(stderr, "unknown criterion %d\n", id);
            return 2;
        }
        Outcome o;
        try {
            o = it->second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        results.emplace_back(id, o);
    }

    std::printf("\nsummary\n");
    int failures = 0;
    for (const auto& [id, o] : results) {
        std::printf("criterion %d: %s\n", id, o.pass ? "PASS" : "FAIL");
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
