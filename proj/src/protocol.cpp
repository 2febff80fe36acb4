#include "cfbench/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "cfbench/errors.hpp"
#include "cfbench/optimizer.hpp"

namespace cfbench {

namespace {

// Stream tags of the individual protocol stages.
constexpr std::uint64_t kPhase1Tag = 1;
constexpr std::uint64_t kPhase2Tag = 2;
constexpr std::uint64_t kBaselineTag = 3;
constexpr std::uint64_t kImmTag = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct RunStreams {
    RngStream shuffle;
    RngStream dropout;
};

RunStreams streams_for(const Seeds& seeds, std::uint64_t tag, std::uint64_t index) {
    return {RngStream(derive_seed(seeds.shuffle, {tag, index})),
            RngStream(derive_seed(seeds.dropout, {tag, index}))};
}

TrainOptions train_options(const HyperParams& hp, double lr, const ProtocolOptions& options) {
    TrainOptions t;
    t.learning_rate = lr;
    t.momentum = hp.momentum;
    t.epochs = hp.epochs;
    t.batch_size = hp.batch_size;
    t.eval_every_batches = options.eval_every_batches;
    return t;
}

double steps_to_epoch(std::size_t step, std::size_t steps_per_epoch) {
    return steps_per_epoch == 0
               ? 0.0
               : static_cast<double>(step) / static_cast<double>(steps_per_epoch);
}

// Evaluates D1, D2 and the joint test set at every evaluation step.
RunRecord train_three_curves(Network& net, const Dataset& train, const TrainOptions& topts,
                             RunStreams& rs, const PenaltyFn& penalty, const Dataset& d1_test,
                             const Dataset& d2_test, const Dataset& joint_test) {
    RunRecord rec;
    const auto start = Clock::now();
    std::size_t spe = 0;
    try {
        const auto stats = train_network(
            net, train, topts, rs.shuffle, rs.dropout, penalty,
            [&](std::size_t step, const Network& n) {
                EvalPoint p;
                p.step = step;
                p.acc_d1 = evaluate_accuracy(n, d1_test);
                p.acc_d2 = evaluate_accuracy(n, d2_test);
                p.acc_joint = evaluate_accuracy(n, joint_test);
                rec.curve.push_back(p);
            });
        spe = stats.steps_per_epoch;
        rec.total_steps = stats.total_steps;
    } catch (const NumericalError& e) {
        rec.failed = true;
        rec.failure = e.what();
    }
    const std::size_t batches = (train.size() + topts.batch_size - 1) / topts.batch_size;
    rec.steps_per_epoch = spe != 0 ? spe : batches;
    if (rec.total_steps == 0)
        rec.total_steps = rec.steps_per_epoch * topts.epochs;
    for (auto& p : rec.curve)
        p.epoch = steps_to_epoch(p.step, rec.steps_per_epoch);
    rec.wall_seconds = seconds_since(start);
    return rec;
}

void check_eps2(const std::vector<double>& eps2_values) {
    if (eps2_values.empty())
        throw ConfigError("the eps2 sweep needs at least one value");
    for (double e : eps2_values)
        if (!(e > 0.0))
            throw ConfigError("eps2 values must be positive");
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::FC: return "FC";
        case ModelKind::DFC: return "D-FC";
        case ModelKind::CONV: return "CONV";
        case ModelKind::DCONV: return "D-CONV";
        case ModelKind::LWTA: return "LWTA";
        case ModelKind::EWC: return "EWC";
        case ModelKind::IMM: return "IMM";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    for (ModelKind k : all_model_kinds())
        if (to_string(k) == s)
            return k;
    throw ConfigError("unknown model kind '" + s + "'");
}

std::vector<ModelKind> all_model_kinds() {
    return {ModelKind::FC,   ModelKind::DFC, ModelKind::CONV, ModelKind::DCONV,
            ModelKind::LWTA, ModelKind::EWC, ModelKind::IMM};
}

bool is_conv(ModelKind kind) { return kind == ModelKind::CONV || kind == ModelKind::DCONV; }

std::vector<LayerSpec> HyperParams::layer_specs() const {
    switch (model) {
        case ModelKind::FC:
        case ModelKind::EWC:
        case ModelKind::IMM: return fc_layers(layers, width);
        case ModelKind::DFC: return dropout_fc_layers(layers, width, input_drop, hidden_drop);
        case ModelKind::LWTA: return lwta_layers(layers, width, lwta_block);
        case ModelKind::CONV: return conv_layers(false);
        case ModelKind::DCONV: return conv_layers(true, hidden_drop);
    }
    throw ConfigError("unknown model kind");
}

std::string HyperParams::label() const {
    std::ostringstream os;
    if (!is_conv(model))
        os << "L" << layers << "-S" << width << "-";
    os << "e1=" << eps1;
    return os.str();
}

Grid build_grid(ModelKind kind, const GridOptions& options) {
    if (options.eps1.empty() || (!is_conv(kind) && (options.layers.empty() || options.widths.empty())))
        throw ConfigError("grid value sets must not be empty");
    check_eps2(options.eps2);

    HyperParams base;
    base.model = kind;
    base.epochs = options.epochs;
    base.batch_size = options.batch_size;
    base.momentum = kind == ModelKind::IMM ? 0.0 : 0.99;
    if (kind == ModelKind::DCONV) {
        base.input_drop = 0.5;
        base.hidden_drop = 0.5;
    }
    base.ewc_lambda = options.ewc_lambda;
    base.transfer = options.transfer;
    base.l2_strength = options.transfer == TransferMode::L2 ? kL2TransferStrength : 0.0;

    Grid g;
    g.eps2 = options.eps2;
    if (is_conv(kind)) {
        base.layers = 0;
        base.width = 0;
        for (double e1 : options.eps1) {
            HyperParams hp = base;
            hp.eps1 = e1;
            g.points.push_back(hp);
        }
        return g;
    }
    for (std::size_t l : options.layers)
        for (std::size_t s : options.widths)
            for (double e1 : options.eps1) {
                HyperParams hp = base;
                hp.layers = l;
                hp.width = s;
                hp.eps1 = e1;
                g.points.push_back(hp);
            }
    return g;
}

void AccessLog::record(std::string event) {
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(event));
}

std::vector<std::string> AccessLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<std::size_t> eval_steps(std::size_t total_steps, std::size_t every) {
    if (every == 0)
        throw ConfigError("evaluation interval must be positive");
    std::vector<std::size_t> steps{0};
    for (std::size_t s = every; s < total_steps; s += every)
        steps.push_back(s);
    if (total_steps > 0)
        steps.push_back(total_steps);
    return steps;
}

TrainStats train_network(Network& net, const Dataset& train, const TrainOptions& options,
                         RngStream& shuffle, RngStream& dropout, const PenaltyFn& penalty,
                         const std::function<void(std::size_t, const Network&)>& on_eval) {
    if (train.empty())
        throw DataError("cannot train on an empty dataset");
    if (options.batch_size == 0 || options.epochs == 0)
        throw ConfigError("batch size and epochs must be positive");

    TrainStats stats;
    const std::size_t n = train.size();
    stats.steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
    stats.total_steps = stats.steps_per_epoch * options.epochs;
    const std::size_t every =
        options.eval_every_batches != 0 ? options.eval_every_batches : stats.steps_per_epoch;
    stats.losses.reserve(stats.total_steps);

    auto opt = OptimizerState::for_params(net.params(), options.learning_rate, options.momentum);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    if (on_eval)
        on_eval(0, net);
    std::size_t step = 0;
    for (std::size_t e = 0; e < options.epochs; ++e) {
        shuffle.shuffle(std::span<std::size_t>(order));
        for (std::size_t b = 0; b < stats.steps_per_epoch; ++b) {
            const std::size_t lo = b * options.batch_size;
            const std::size_t hi = std::min(n, lo + options.batch_size);
            const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
            const Tensor batch = train.gather(idx);
            const auto labels = train.gather_labels(idx);
            auto lg = loss_and_grads(net, batch, labels, penalty, Mode::Train, &dropout);
            stats.losses.push_back(lg.loss);
            step_sgd_momentum(net.params(), lg.grads, opt);
            ++step;
            if (on_eval && (step % every == 0 || step == stats.total_steps))
                on_eval(step, net);
        }
    }
    return stats;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> a;
    for (int i = 0; i <= 20; ++i)
        a.push_back(i / 20.0);
    return a;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : workers)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

Phase1Result run_phase1(const Grid& grid, const DataHandle& d1_train, const DataHandle& d1_test,
                        const ProtocolOptions& options) {
    if (grid.points.empty())
        throw ConfigError("phase 1 needs at least one grid point");

    struct Job {
        RunRecord record;
        std::optional<Network> best;
        std::size_t best_step = 0;
        double best_acc = -1.0;
    };
    std::vector<Job> jobs(grid.points.size());

    parallel_for(grid.points.size(), options.jobs, [&](std::size_t i) {
        const HyperParams& hp = grid.points[i];
        const Dataset& train = d1_train.get();
        const Dataset& test = d1_test.get();
        Job& job = jobs[i];
        job.record.phase = "phase1";
        job.record.grid_index = i;
        job.record.params = hp;

        const auto start = Clock::now();
        RngStream init(derive_seed(options.seeds.init, {kPhase1Tag, i}));
        Network net = build_network(hp.layer_specs(), train.dims(), init);
        auto rs = streams_for(options.seeds, kPhase1Tag, i);
        try {
            const auto stats = train_network(
                net, train, train_options(hp, hp.eps1, options), rs.shuffle, rs.dropout, {},
                [&](std::size_t step, const Network& n) {
                    EvalPoint p;
                    p.step = step;
                    p.acc_d1 = evaluate_accuracy(n, test);
                    job.record.curve.push_back(p);
                    if (*p.acc_d1 > job.best_acc) {
                        job.best_acc = *p.acc_d1;
                        job.best_step = step;
                        job.best = n;
                    }
                });
            job.record.steps_per_epoch = stats.steps_per_epoch;
            job.record.total_steps = stats.total_steps;
        } catch (const NumericalError& e) {
            job.record.failed = true;
            job.record.failure = "grid point " + std::to_string(i) + " (" + hp.label() +
                                 "): " + e.what();
        }
        if (job.record.steps_per_epoch == 0) {
            job.record.steps_per_epoch = (train.size() + hp.batch_size - 1) / hp.batch_size;
            job.record.total_steps = job.record.steps_per_epoch * hp.epochs;
        }
        for (auto& p : job.record.curve)
            p.epoch = steps_to_epoch(p.step, job.record.steps_per_epoch);
        job.record.wall_seconds = seconds_since(start);
    });

    std::optional<std::size_t> winner;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Job& j = jobs[i];
        if (j.record.failed || !j.best)
            continue;
        if (!winner) {
            winner = i;
            continue;
        }
        const Job& w = jobs[*winner];
        if (j.best_acc > w.best_acc || (j.best_acc == w.best_acc && j.best_step < w.best_step))
            winner = i;
    }
    if (!winner)
        throw NumericalError("every phase-1 grid point diverged", -1);

    Phase1Result out{*jobs[*winner].best, *winner, jobs[*winner].best_step,
                     jobs[*winner].best_acc, {}};
    for (auto& j : jobs)
        out.runs.push_back(std::move(j.record));
    return out;
}

Phase2Result run_phase2(const Network& model, const HyperParams& params,
                        const std::vector<double>& eps2_values, const Phase2Data& data,
                        const ProtocolOptions& options, const std::optional<EwcState>& ewc) {
    check_eps2(eps2_values);
    const Dataset& train = data.d2_train.get();
    const Dataset& d1_test = data.d1_test.get();
    const Dataset& d2_test = data.d2_test.get();
    const Dataset& joint_test = data.joint_test.get();

    std::vector<RunRecord> runs(eps2_values.size());
    parallel_for(eps2_values.size(), options.jobs, [&](std::size_t j) {
        const double eps2 = eps2_values[j];
        Network net = model;
        PenaltyFn penalty;
        if (ewc) {
            EwcState state = *ewc;
            state.lambda = params.ewc_lambda.value_or(1.0 / eps2);
            penalty = make_ewc_penalty(std::move(state));
        }
        auto rs = streams_for(options.seeds, kPhase2Tag, j);
        runs[j] = train_three_curves(net, train, train_options(params, eps2, options), rs, penalty,
                                     d1_test, d2_test, joint_test);
        runs[j].phase = "phase2";
        runs[j].params = params;
        runs[j].eps2 = eps2;
    });

    Phase2Result out;
    std::optional<std::size_t> best_run, last_run;
    std::size_t best_step = 0;
    for (std::size_t j = 0; j < runs.size(); ++j) {
        const RunRecord& r = runs[j];
        if (r.failed || r.curve.empty())
            continue;
        for (const auto& p : r.curve) {
            const double acc = *p.acc_joint;
            bool better = !best_run || acc > out.quality.q_best;
            if (best_run && acc == out.quality.q_best)
                better = p.step < best_step ||
                         (p.step == best_step && eps2_values[j] < eps2_values[*best_run]);
            if (better) {
                out.quality.q_best = acc;
                best_step = p.step;
                best_run = j;
            }
        }
        const double last = *r.curve.back().acc_joint;
        if (!last_run || last > out.quality.q_last ||
            (last == out.quality.q_last && eps2_values[j] < eps2_values[*last_run])) {
            out.quality.q_last = last;
            last_run = j;
        }
    }
    if (!best_run)
        throw NumericalError("every phase-2 run diverged", -1);
    out.quality.eps2_best = eps2_values[*best_run];
    out.quality.eps2_last = eps2_values[*last_run];
    out.runs = std::move(runs);
    return out;
}

std::pair<double, RunRecord> run_baseline(const Network& architecture, const HyperParams& params,
                                          const DataHandle& joint_train,
                                          const DataHandle& joint_test,
                                          const ProtocolOptions& options) {
    const Dataset& train = joint_train.get();
    const Dataset& test = joint_test.get();
    if (train.empty() || test.empty())
        throw DataError("baseline needs non-empty joint train and test sets");

    const auto start = Clock::now();
    RngStream init(derive_seed(options.seeds.init, {kBaselineTag, 0}));
    Network net = reinitialized(architecture, init);
    auto rs = streams_for(options.seeds, kBaselineTag, 0);

    RunRecord rec;
    rec.phase = "baseline";
    rec.params = params;
    const auto stats = train_network(net, train, train_options(params, params.eps1, options),
                                     rs.shuffle, rs.dropout, {},
                                     [&](std::size_t step, const Network& n) {
                                         EvalPoint p;
                                         p.step = step;
                                         p.acc_joint = evaluate_accuracy(n, test);
                                         rec.curve.push_back(p);
                                     });
    rec.steps_per_epoch = stats.steps_per_epoch;
    rec.total_steps = stats.total_steps;
    for (auto& p : rec.curve)
        p.epoch = steps_to_epoch(p.step, rec.steps_per_epoch);
    rec.wall_seconds = seconds_since(start);
    return {*rec.curve.back().acc_joint, std::move(rec)};
}

ImmResult run_imm(const Network& model1, const HyperParams& params,
                  const std::vector<double>& eps2_values, const Phase2Data& data,
                  const ProtocolOptions& options) {
    check_eps2(eps2_values);
    const Dataset& d1_train = data.d1_train.get();
    const Dataset& d2_train = data.d2_train.get();
    const Dataset& d1_test = data.d1_test.get();
    const Dataset& d2_test = data.d2_test.get();
    const Dataset& joint_test = data.joint_test.get();

    std::vector<RunRecord> runs(eps2_values.size());
    std::vector<std::optional<Network>> trained(eps2_values.size());
    parallel_for(eps2_values.size(), options.jobs, [&](std::size_t j) {
        RngStream init(derive_seed(options.seeds.init, {kImmTag, j}));
        TransferInit ti = transfer_init(model1, params.transfer, init);
        auto rs = streams_for(options.seeds, kImmTag, j);
        runs[j] = train_three_curves(ti.net, d2_train,
                                     train_options(params, eps2_values[j], options), rs,
                                     ti.penalty, d1_test, d2_test, joint_test);
        runs[j].phase = "phase2";
        runs[j].params = params;
        runs[j].eps2 = eps2_values[j];
        if (!runs[j].failed)
            trained[j] = std::move(ti.net);
    });

    std::optional<std::size_t> pick;
    for (std::size_t j = 0; j < runs.size(); ++j) {
        if (!trained[j])
            continue;
        const double acc = *runs[j].curve.back().acc_d2;
        if (!pick || acc > *runs[*pick].curve.back().acc_d2 ||
            (acc == *runs[*pick].curve.back().acc_d2 && eps2_values[j] < eps2_values[*pick]))
            pick = j;
    }
    if (!pick)
        throw NumericalError("every IMM second-model run diverged", -1);
    const Network& model2 = *trained[*pick];

    RngStream f1_rng(derive_seed(options.seeds.fisher, {kImmTag, 1}));
    RngStream f2_rng(derive_seed(options.seeds.fisher, {kImmTag, 2}));
    ImmState state;
    state.params1 = model1.params();
    state.params2 = model2.params();
    state.fisher1 = estimate_fisher_diagonal(model1, d1_train, options.fisher_samples, f1_rng);
    state.fisher2 = estimate_fisher_diagonal(model2, d2_train, options.fisher_samples, f2_rng);
    state.transfer = params.transfer;
    state.l2_strength = params.l2_strength;

    ImmResult out;
    out.tuning.alphas = options.alpha_grid.empty() ? default_alpha_grid() : options.alpha_grid;
    out.tuning.eps2 = eps2_values[*pick];
    out.tuning.model1_joint = evaluate_accuracy(model1, joint_test);
    out.tuning.model2_joint = evaluate_accuracy(model2, joint_test);

    Network merged = model1;
    bool first = true;
    for (double a : out.tuning.alphas) {
        for (MergeVariant v : {MergeVariant::Mean, MergeVariant::Mode}) {
            merged.set_params(imm_merge(state, a, v));
            const double acc = evaluate_accuracy(merged, joint_test);
            (v == MergeVariant::Mean ? out.tuning.mean_accuracy : out.tuning.mode_accuracy)
                .push_back(acc);
            if (first || acc > out.quality.q_best) {
                out.quality.q_best = acc;
                out.quality.alpha = a;
                out.quality.variant = v;
                first = false;
            }
        }
    }
    out.quality.q_last = out.quality.q_best;
    out.quality.eps2_best = out.tuning.eps2;
    out.quality.eps2_last = out.tuning.eps2;
    out.runs = std::move(runs);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetPair& base,
                                AccessLog* log) {
    const Grid grid = build_grid(config.model, config.grid);
    const SltInstance inst = apply_slt(config.slt, base);

    const DataHandle d1_train(inst.d1.train, "d1-train", log);
    const DataHandle d1_test(inst.d1.test, "d1-test", log);
    const DataHandle d2_train(inst.d2.train, "d2-train", log);
    const DataHandle d2_test(inst.d2.test, "d2-test", log);
    const DataHandle joint_train(inst.joint.train, "joint-train", log);
    const DataHandle joint_test(inst.joint.test, "joint-test", log);

    ExperimentResult res;
    res.model = config.model;
    res.dataset_name = config.dataset_name;
    res.slt = config.slt;
    res.grid = grid;
    res.d1_test_size = inst.d1.test.size();
    res.d2_test_size = inst.d2.test.size();
    res.joint_test_size = inst.joint.test.size();

    if (log != nullptr)
        log->record("begin:phase1");
    Phase1Result p1 = run_phase1(grid, d1_train, d1_test, config.protocol);
    if (log != nullptr)
        log->record("end:phase1");
    res.selected_index = p1.grid_index;
    res.selected_step = p1.step;
    res.selected_accuracy = p1.accuracy;
    res.phase1 = std::move(p1.runs);
    const HyperParams& hp = grid.points[res.selected_index];

    const Phase2Data p2data{d1_train, d1_test, d2_train, d2_test, joint_test};
    if (config.model == ModelKind::IMM) {
        ImmResult imm = run_imm(p1.best, hp, grid.eps2, p2data, config.protocol);
        res.quality = imm.quality;
        res.imm = std::move(imm.tuning);
        res.phase2 = std::move(imm.runs);
        res.constraint_notes.push_back(
            "merge weight alpha and variant are selected on joint test data");
    } else {
        std::optional<EwcState> ewc;
        if (config.model == ModelKind::EWC) {
            RngStream frng(derive_seed(config.protocol.seeds.fisher, {kPhase2Tag, 0}));
            ewc = EwcState{p1.best.params(),
                           estimate_fisher_diagonal(p1.best, d1_train.get(),
                                                    config.protocol.fisher_samples, frng),
                           0.0};
        }
        res.ewc_fisher = ewc ? std::optional(ewc->fisher) : std::nullopt;
        Phase2Result p2 = run_phase2(p1.best, hp, grid.eps2, p2data, config.protocol, ewc);
        res.quality = p2.quality;
        res.phase2 = std::move(p2.runs);
    }
    res.constraint_notes.push_back("best quality reads D1 test data during retraining on D2");

    auto [baseline, brec] = run_baseline(p1.best, hp, joint_train, joint_test, config.protocol);
    res.baseline = baseline;
    res.baseline_run = std::move(brec);
    res.selected_model = std::move(p1.best);
    res.metric = make_metric_record(res.dataset_name, to_string(res.model), res.slt,
                                    res.quality.q_best, res.quality.q_last, res.baseline);
    return res;
}

}  // namespace cfbench
