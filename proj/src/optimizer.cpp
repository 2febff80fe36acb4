#include "cfbench/optimizer.hpp"

#include "cfbench/errors.hpp"

namespace cfbench {

OptimizerState OptimizerState::for_params(const ParamSet& params, double learning_rate,
                                          double momentum) {
    if (!(learning_rate > 0.0))
        throw ConfigError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must be in [0, 1)");
    return {zeros_like(params), learning_rate, momentum};
}

void step_sgd_momentum(ParamSet& params, const ParamSet& grads, OptimizerState& opt) {
    if (!same_shapes(params, grads) || !same_shapes(params, opt.velocity))
        throw ConfigError("optimizer shape mismatch");
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& theta = params[t].data;
        auto& v = opt.velocity[t].data;
        const auto& g = grads[t].data;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = opt.momentum * v[i] - opt.learning_rate * g[i];
            theta[i] += v[i];
        }
    }
}

}  // namespace cfbench
