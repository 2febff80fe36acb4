#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "cfbench/network.hpp"
#include "cfbench/rng.hpp"
#include "cfbench/tensor.hpp"

namespace cfbench {

class Dataset;

/// Diagonal of the Fisher information, one nonnegative entry per parameter.
struct FisherDiagonal {
    ParamSet values;
    std::size_t samples = 0;
};

/// F_i = mean over sampled inputs of (d log p(y|x) / d theta_i)^2, with y drawn from
/// the model's own predictive distribution. Inputs cycle through a shuffled order of
/// `data`; all randomness comes from `rng`.
FisherDiagonal estimate_fisher_diagonal(const Network& net, const Dataset& data,
                                        std::size_t n_samples, RngStream& rng);

/// Exact expectation over the 10 labels for a single input: sum_y p(y|x) g_y^2.
FisherDiagonal exact_fisher_single(const Network& net, const Tensor& input);

struct EwcState {
    ParamSet anchor;
    FisherDiagonal fisher;
    double lambda = 0.0;
};

struct PenaltyValue {
    double value = 0.0;
    ParamSet grads;
};

/// (lambda / 2) * sum_i F_i (theta_i - anchor_i)^2 and its gradient.
PenaltyValue ewc_penalty(const ParamSet& params, const EwcState& state);

/// Wraps ewc_penalty for loss_and_grads.
PenaltyFn make_ewc_penalty(EwcState state);

enum class TransferMode { Weight, L2, Random };

std::string to_string(TransferMode mode);
TransferMode transfer_mode_from_string(const std::string& s);

/// Regularization strength of the L2-transfer variant.
inline constexpr double kL2TransferStrength = 0.01;

/// strength * ||theta - anchor||^2.
PenaltyValue l2_transfer_penalty(const ParamSet& params, const ParamSet& anchor,
                                 double strength = kL2TransferStrength);

struct TransferInit {
    Network net;
    PenaltyFn penalty;  // empty unless mode == L2
};

/// Starting point of the second training phase. Weight transfer copies `model1`;
/// L2 and Random draw a fresh init from `rng`, L2 additionally anchors to model1.
TransferInit transfer_init(const Network& model1, TransferMode mode, RngStream& rng);

enum class MergeVariant { Mean, Mode };

std::string to_string(MergeVariant v);

inline constexpr double kModeMergeStabilizer = 1e-8;

struct ImmState {
    ParamSet params1;
    std::optional<FisherDiagonal> fisher1;
    ParamSet params2;
    std::optional<FisherDiagonal> fisher2;
    TransferMode transfer = TransferMode::Weight;
    double l2_strength = 0.0;
};

/// (1 - alpha) * theta1 + alpha * theta2.
ParamSet imm_mean_merge(const ImmState& state, double alpha);

/// Fisher-weighted merge:
///   ((1-a) F1 t1 + a F2 t2 + eps * m) / ((1-a) F1 + a F2 + eps),  m = mean merge.
/// Where both Fisher entries vanish the result falls back to the mean merge.
ParamSet imm_mode_merge(const ImmState& state, double alpha,
                        double stabilizer = kModeMergeStabilizer);

ParamSet imm_merge(const ImmState& state, double alpha, MergeVariant variant);

}  // namespace cfbench
