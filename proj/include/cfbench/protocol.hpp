#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cfbench/continual.hpp"
#include "cfbench/data.hpp"
#include "cfbench/metrics.hpp"
#include "cfbench/network.hpp"
#include "cfbench/slt.hpp"

namespace cfbench {

enum class ModelKind { FC, DFC, CONV, DCONV, LWTA, EWC, IMM };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
std::vector<ModelKind> all_model_kinds();
bool is_conv(ModelKind kind);

/// One point of the hyper-parameter search plus the fixed per-model extras.
struct HyperParams {
    ModelKind model = ModelKind::FC;
    std::size_t layers = 2;   // ignored by conv kinds
    std::size_t width = 200;  // ignored by conv kinds
    double eps1 = 0.01;
    std::size_t epochs = 10;
    std::size_t batch_size = 100;
    double momentum = 0.99;   // 0 (plain SGD) for IMM
    double input_drop = 0.2;
    double hidden_drop = 0.5;
    std::size_t lwta_block = 2;
    std::optional<double> ewc_lambda;  // unset: lambda = 1 / eps2
    TransferMode transfer = TransferMode::Weight;
    double l2_strength = 0.0;          // 0.01 for L2-transfer

    std::vector<LayerSpec> layer_specs() const;
    std::string label() const;
};

/// Value sets of the search; the defaults are the full search space.
struct GridOptions {
    std::vector<std::size_t> layers{2, 3};
    std::vector<std::size_t> widths{200, 400, 800};
    std::vector<double> eps1{0.01, 0.001};
    std::vector<double> eps2{0.001, 0.0001, 0.00001};
    std::size_t epochs = 10;
    std::size_t batch_size = 100;
    std::optional<double> ewc_lambda;
    TransferMode transfer = TransferMode::Weight;
};

/// Phase-1 points (Cartesian product of L, S, eps1; eps1 only for conv kinds)
/// and the eps2 values swept in phase 2.
struct Grid {
    std::vector<HyperParams> points;
    std::vector<double> eps2;
};

Grid build_grid(ModelKind kind, const GridOptions& options = {});

// ---- access audit ----

/// Thread-safe, append-only log of dataset accesses and phase markers.
class AccessLog {
public:
    void record(std::string event);
    std::vector<std::string> events() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> events_;
};

/// Named view on a dataset that logs every read to an AccessLog.
class DataHandle {
public:
    DataHandle(const Dataset& data, std::string name, AccessLog* log = nullptr)
        : data_(&data), name_(std::move(name)), log_(log) {}

    const Dataset& get() const {
        if (log_ != nullptr)
            log_->record("read:" + name_);
        return *data_;
    }
    const std::string& name() const noexcept { return name_; }

private:
    const Dataset* data_;
    std::string name_;
    AccessLog* log_;
};

// ---- training ----

struct Seeds {
    std::uint64_t init = 1;
    std::uint64_t shuffle = 2;
    std::uint64_t dropout = 3;
    std::uint64_t permutation = 4;
    std::uint64_t fisher = 5;

    friend bool operator==(const Seeds&, const Seeds&) = default;
};

/// One evaluation of the model during a run. Accuracies a run does not
/// measure (D2 and joint in phase 1) are left empty.
struct EvalPoint {
    std::size_t step = 0;
    double epoch = 0.0;
    std::optional<double> acc_d1;
    std::optional<double> acc_d2;
    std::optional<double> acc_joint;
};

struct RunRecord {
    std::string phase;  // phase1 | phase2 | baseline
    std::size_t grid_index = 0;
    HyperParams params;
    std::optional<double> eps2;
    std::size_t steps_per_epoch = 0;
    std::size_t total_steps = 0;
    std::vector<EvalPoint> curve;
    bool failed = false;
    std::string failure;
    double wall_seconds = 0.0;  // kept out of the record files
};

struct TrainOptions {
    double learning_rate = 0.01;
    double momentum = 0.99;
    std::size_t epochs = 10;
    std::size_t batch_size = 100;
    std::size_t eval_every_batches = 0;  // 0 = once per epoch
};

/// Steps at which a run of `total_steps` is evaluated: 0, every `every` steps, and the last step.
std::vector<std::size_t> eval_steps(std::size_t total_steps, std::size_t every);

struct TrainStats {
    std::size_t steps_per_epoch = 0;
    std::size_t total_steps = 0;
    std::vector<double> losses;  // one per optimizer step
};

/// Mini-batch training for `epochs` passes over `train` (reshuffled every epoch,
/// partial last batch kept). `on_eval(step, net)` runs at every evaluation step,
/// including step 0 before any update. Throws NumericalError on divergence.
TrainStats train_network(Network& net, const Dataset& train, const TrainOptions& options,
                         RngStream& shuffle, RngStream& dropout, const PenaltyFn& penalty,
                         const std::function<void(std::size_t, const Network&)>& on_eval);

// ---- protocol ----

struct ProtocolOptions {
    Seeds seeds;
    std::size_t eval_every_batches = 0;
    std::size_t fisher_samples = 1000;
    std::vector<double> alpha_grid;  // empty: 0.00, 0.05, ..., 1.00
    std::size_t jobs = 1;
};

std::vector<double> default_alpha_grid();

struct Phase1Result {
    Network best;
    std::size_t grid_index = 0;
    std::size_t step = 0;
    double accuracy = 0.0;
    std::vector<RunRecord> runs;
};

/// Trains every grid point on D1 and keeps the snapshot with the highest D1-test
/// accuracy (ties: earlier step, then lower grid index). Diverging points are
/// recorded as failed. Only the two D1 handles are ever read.
Phase1Result run_phase1(const Grid& grid, const DataHandle& d1_train, const DataHandle& d1_test,
                        const ProtocolOptions& options);

struct Quality {
    double q_best = 0.0;
    double q_last = 0.0;
    std::optional<double> eps2_best;
    std::optional<double> eps2_last;
    std::optional<double> alpha;
    std::optional<MergeVariant> variant;
};

struct Phase2Result {
    Quality quality;
    std::vector<RunRecord> runs;
};

/// Handles used after phase 1: both sub-tasks and the joint test set.
struct Phase2Data {
    DataHandle d1_train;
    DataHandle d1_test;
    DataHandle d2_train;
    DataHandle d2_test;
    DataHandle joint_test;
};

/// Retrains a copy of `model` on D2 for every eps2. q_best is the maximum joint
/// accuracy over eps2 and steps; q_last the maximum over eps2 of the final value.
/// `ewc` (when set) supplies anchor and Fisher; lambda is 1/eps2 unless overridden.
Phase2Result run_phase2(const Network& model, const HyperParams& params,
                        const std::vector<double>& eps2_values, const Phase2Data& data,
                        const ProtocolOptions& options, const std::optional<EwcState>& ewc = {});

/// Fresh init of the architecture trained on the joint training set with eps1;
/// returns the run with its final joint-test accuracy.
std::pair<double, RunRecord> run_baseline(const Network& architecture, const HyperParams& params,
                                          const DataHandle& joint_train,
                                          const DataHandle& joint_test,
                                          const ProtocolOptions& options);

struct ImmTuning {
    std::vector<double> alphas;
    std::vector<double> mean_accuracy;  // joint-test accuracy per alpha
    std::vector<double> mode_accuracy;
    double eps2 = 0.0;                  // eps2 of the selected second model
    double model1_joint = 0.0;
    double model2_joint = 0.0;
};

struct ImmResult {
    Quality quality;
    ImmTuning tuning;
    std::vector<RunRecord> runs;
};

/// Second model trained on D2 per transfer mode and eps2 (selected by final D2-test
/// accuracy), Fisher diagonals for both models, then mean/mode merges over the
/// alpha grid evaluated on the joint test set.
ImmResult run_imm(const Network& model1, const HyperParams& params,
                  const std::vector<double>& eps2_values, const Phase2Data& data,
                  const ProtocolOptions& options);

struct ExperimentConfig {
    ModelKind model = ModelKind::FC;
    std::string dataset_name = "dataset";
    SltSpec slt;
    GridOptions grid;
    ProtocolOptions protocol;
};

struct ExperimentResult {
    ModelKind model = ModelKind::FC;
    std::string dataset_name;
    SltSpec slt;
    Grid grid;
    std::size_t selected_index = 0;
    std::size_t selected_step = 0;
    double selected_accuracy = 0.0;
    std::vector<RunRecord> phase1;
    std::vector<RunRecord> phase2;
    RunRecord baseline_run;
    double baseline = 0.0;
    Quality quality;
    std::optional<ImmTuning> imm;
    Network selected_model;                  // selected phase-1 snapshot
    std::optional<FisherDiagonal> ewc_fisher;
    MetricRecord metric;
    std::vector<std::string> constraint_notes;
    std::size_t d1_test_size = 0;
    std::size_t d2_test_size = 0;
    std::size_t joint_test_size = 0;
};

/// Builds the SLT from `base`, then phase 1 -> (EWC Fisher) -> phase 2 or IMM -> baseline.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetPair& base,
                                AccessLog* log = nullptr);

/// Runs fn(0..n-1) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cfbench
