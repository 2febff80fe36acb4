#include "cfbench/continual.hpp"

#include <cmath>

#include "cfbench/data.hpp"
#include "cfbench/errors.hpp"

namespace cfbench {

namespace {

void accumulate_squares(ParamSet& acc, const ParamSet& grads, double weight) {
    for (std::size_t t = 0; t < acc.size(); ++t)
        for (std::size_t i = 0; i < acc[t].size(); ++i)
            acc[t].data[i] += weight * grads[t].data[i] * grads[t].data[i];
}

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("merge weight alpha must be in [0, 1]");
}

void check_pair(const ImmState& s) {
    if (!same_shapes(s.params1, s.params2))
        throw ConfigError("IMM models do not share an architecture");
}

}  // namespace

FisherDiagonal estimate_fisher_diagonal(const Network& net, const Dataset& data,
                                        std::size_t n_samples, RngStream& rng) {
    if (data.empty())
        throw DataError("cannot estimate Fisher information on an empty dataset");
    if (n_samples == 0)
        throw ConfigError("Fisher estimation needs at least one sample");

    FisherDiagonal f{zeros_like(net.params()), n_samples};
    const auto order = rng.permutation(data.size());
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t idx = order[s % order.size()];
        const Tensor x = data.gather(std::span<const std::size_t>(&idx, 1));
        const Tensor p = forward(net, x, Mode::Eval).probabilities;
        // Inverse-CDF draw from the predictive distribution.
        const double u = rng.uniform();
        int y = static_cast<int>(Network::kClasses) - 1;
        double cum = 0.0;
        for (std::size_t c = 0; c < Network::kClasses; ++c) {
            cum += p.data[c];
            if (u < cum) {
                y = static_cast<int>(c);
                break;
            }
        }
        const auto lg = loss_and_grads(net, x, std::span<const int>(&y, 1), {}, Mode::Eval);
        accumulate_squares(f.values, lg.grads, 1.0);
    }
    const double inv = 1.0 / static_cast<double>(n_samples);
    for (auto& t : f.values)
        for (auto& v : t.data)
            v *= inv;
    return f;
}

FisherDiagonal exact_fisher_single(const Network& net, const Tensor& input) {
    if (input.dim(0) != 1)
        throw ConfigError("exact Fisher expects a single input");
    FisherDiagonal f{zeros_like(net.params()), 1};
    const Tensor p = forward(net, input, Mode::Eval).probabilities;
    for (int y = 0; y < static_cast<int>(Network::kClasses); ++y) {
        const auto lg = loss_and_grads(net, input, std::span<const int>(&y, 1), {}, Mode::Eval);
        accumulate_squares(f.values, lg.grads, p.data[static_cast<std::size_t>(y)]);
    }
    return f;
}

PenaltyValue ewc_penalty(const ParamSet& params, const EwcState& state) {
    if (!same_shapes(params, state.anchor) || !same_shapes(params, state.fisher.values))
        throw ConfigError("EWC anchor/Fisher shapes do not match the parameters");
    PenaltyValue out{0.0, zeros_like(params)};
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double d = params[t].data[i] - state.anchor[t].data[i];
            const double f = state.fisher.values[t].data[i];
            out.value += f * d * d;
            out.grads[t].data[i] = state.lambda * f * d;
        }
    out.value *= 0.5 * state.lambda;
    return out;
}

PenaltyFn make_ewc_penalty(EwcState state) {
    return [state = std::move(state)](const ParamSet& params, ParamSet& grads) {
        const PenaltyValue pv = ewc_penalty(params, state);
        for (std::size_t t = 0; t < grads.size(); ++t)
            for (std::size_t i = 0; i < grads[t].size(); ++i)
                grads[t].data[i] += pv.grads[t].data[i];
        return pv.value;
    };
}

std::string to_string(TransferMode mode) {
    switch (mode) {
        case TransferMode::Weight: return "weight";
        case TransferMode::L2: return "l2";
        case TransferMode::Random: return "random";
    }
    return "?";
}

TransferMode transfer_mode_from_string(const std::string& s) {
    if (s == "weight")
        return TransferMode::Weight;
    if (s == "l2")
        return TransferMode::L2;
    if (s == "random")
        return TransferMode::Random;
    throw ConfigError("unknown transfer mode '" + s + "' (expected weight, l2 or random)");
}

PenaltyValue l2_transfer_penalty(const ParamSet& params, const ParamSet& anchor, double strength) {
    if (!same_shapes(params, anchor))
        throw ConfigError("L2-transfer anchor shapes do not match the parameters");
    PenaltyValue out{0.0, zeros_like(params)};
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double d = params[t].data[i] - anchor[t].data[i];
            out.value += strength * d * d;
            out.grads[t].data[i] = 2.0 * strength * d;
        }
    return out;
}

TransferInit transfer_init(const Network& model1, TransferMode mode, RngStream& rng) {
    switch (mode) {
        case TransferMode::Weight:
            return {model1, {}};
        case TransferMode::Random:
            return {reinitialized(model1, rng), {}};
        case TransferMode::L2: {
            PenaltyFn pen = [anchor = model1.params()](const ParamSet& params, ParamSet& grads) {
                const PenaltyValue pv = l2_transfer_penalty(params, anchor);
                for (std::size_t t = 0; t < grads.size(); ++t)
                    for (std::size_t i = 0; i < grads[t].size(); ++i)
                        grads[t].data[i] += pv.grads[t].data[i];
                return pv.value;
            };
            return {reinitialized(model1, rng), std::move(pen)};
        }
    }
    throw ConfigError("unknown transfer mode");
}

std::string to_string(MergeVariant v) { return v == MergeVariant::Mean ? "mean" : "mode"; }

ParamSet imm_mean_merge(const ImmState& state, double alpha) {
    check_alpha(alpha);
    check_pair(state);
    ParamSet out = state.params1;
    for (std::size_t t = 0; t < out.size(); ++t)
        for (std::size_t i = 0; i < out[t].size(); ++i)
            out[t].data[i] = (1.0 - alpha) * state.params1[t].data[i] +
                             alpha * state.params2[t].data[i];
    return out;
}

ParamSet imm_mode_merge(const ImmState& state, double alpha, double stabilizer) {
    check_alpha(alpha);
    check_pair(state);
    if (!state.fisher1 || !state.fisher2)
        throw ConfigError("mode-IMM needs Fisher diagonals for both models");
    const ParamSet& f1 = state.fisher1->values;
    const ParamSet& f2 = state.fisher2->values;
    if (!same_shapes(f1, state.params1) || !same_shapes(f2, state.params2))
        throw ConfigError("Fisher shapes do not match the IMM models");
    ParamSet out = state.params1;
    for (std::size_t t = 0; t < out.size(); ++t)
        for (std::size_t i = 0; i < out[t].size(); ++i) {
            const double a1 = (1.0 - alpha) * f1[t].data[i];
            const double a2 = alpha * f2[t].data[i];
            const double t1 = state.params1[t].data[i];
            const double t2 = state.params2[t].data[i];
            const double mean = (1.0 - alpha) * t1 + alpha * t2;
            out[t].data[i] = (a1 * t1 + a2 * t2 + stabilizer * mean) / (a1 + a2 + stabilizer);
        }
    return out;
}

ParamSet imm_merge(const ImmState& state, double alpha, MergeVariant variant) {
    return variant == MergeVariant::Mean ? imm_mean_merge(state, alpha)
                                         : imm_mode_merge(state, alpha);
}

}  // namespace cfbench
