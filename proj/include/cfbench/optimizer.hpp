#pragma once

#include "cfbench/tensor.hpp"

namespace cfbench {

/// Classical momentum: v <- mu * v - lr * g; theta <- theta + v.
/// momentum = 0 is plain SGD.
struct OptimizerState {
    ParamSet velocity;
    double learning_rate = 0.01;
    double momentum = 0.99;

    static OptimizerState for_params(const ParamSet& params, double learning_rate, double momentum);
};

void step_sgd_momentum(ParamSet& params, const ParamSet& grads, OptimizerState& opt);

}  // namespace cfbench
