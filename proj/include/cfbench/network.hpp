#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfbench/rng.hpp"
#include "cfbench/tensor.hpp"

namespace cfbench {

class Dataset;

enum class LayerKind { Dense, Conv2d, MaxPool2d, Relu, Lwta, Dropout, SoftmaxReadout };

std::string to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t width = 0;        // dense units, or readout classes
    std::size_t filters = 0;      // conv
    std::size_t filter_size = 5;  // conv, odd; 'same' zero padding, stride 1
    std::size_t pool_size = 2;
    std::size_t stride = 2;
    std::size_t block_size = 2;   // lwta
    double drop_rate = 0.0;

    static LayerSpec dense(std::size_t width);
    static LayerSpec conv2d(std::size_t filters, std::size_t filter_size = 5);
    static LayerSpec maxpool2d(std::size_t pool = 2, std::size_t stride = 2);
    static LayerSpec relu();
    static LayerSpec lwta(std::size_t block_size = 2);
    static LayerSpec dropout(double rate);
    static LayerSpec softmax_readout(std::size_t classes = 10);

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputDims {
    std::size_t height = 28;
    std::size_t width = 28;
    std::size_t channels = 1;

    std::size_t flat() const noexcept { return height * width * channels; }
    friend bool operator==(const InputDims&, const InputDims&) = default;
};

/// Per-sample activation geometry; flat layers use {1, 1, features}.
struct FeatureShape {
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::size_t flat() const noexcept { return height * width * channels; }
};

enum class Mode { Train, Eval };

/// Feed-forward network: an ordered layer chain plus its trainable parameters.
/// Parameters live in one ParamSet (weight then bias for every dense/conv layer)
/// so optimizers, Fisher estimates and merges can treat them uniformly.
class Network {
public:
    static constexpr std::size_t kClasses = 10;

    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    const InputDims& input_dims() const noexcept { return input_; }
    const ParamSet& params() const noexcept { return params_; }
    ParamSet& params() noexcept { return params_; }

    /// Index of the weight tensor of layer i in params(), or -1 for parameter-free layers.
    std::ptrdiff_t weight_index(std::size_t layer) const { return weight_index_.at(layer); }
    /// Output geometry of layer i.
    const FeatureShape& output_shape(std::size_t layer) const { return shapes_.at(layer + 1); }
    const FeatureShape& input_shape(std::size_t layer) const { return shapes_.at(layer); }
    std::size_t param_count() const noexcept { return total_size(params_); }

    /// Replace parameters; shapes must match.
    void set_params(ParamSet params);

private:
    friend Network build_network(const std::vector<LayerSpec>&, const InputDims&, RngStream&);

    std::vector<LayerSpec> layers_;
    InputDims input_;
    std::vector<FeatureShape> shapes_;
    std::vector<std::ptrdiff_t> weight_index_;
    ParamSet params_;
};

/// Validates the chain, allocates parameters and draws the Glorot-uniform init
/// (weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases zero).
Network build_network(const std::vector<LayerSpec>& spec, const InputDims& dims, RngStream& rng);

/// Same architecture as `net`, freshly initialized from `rng`.
Network reinitialized(const Network& net, RngStream& rng);

// Presets for the compared architectures.
std::vector<LayerSpec> fc_layers(std::size_t hidden_layers, std::size_t width);
std::vector<LayerSpec> dropout_fc_layers(std::size_t hidden_layers, std::size_t width,
                                         double input_rate = 0.2, double hidden_rate = 0.5);
std::vector<LayerSpec> lwta_layers(std::size_t hidden_layers, std::size_t width,
                                   std::size_t block_size = 2);
std::vector<LayerSpec> conv_layers(bool with_dropout, double dropout_rate = 0.5);

struct ForwardCache {
    std::vector<Tensor> activations;                  // activations[i] is the input of layer i
    std::vector<std::vector<std::uint32_t>> indices;  // pool argmax / lwta winners per layer
    std::vector<Tensor> masks;                        // scaled dropout masks per layer
};

struct ForwardResult {
    Tensor probabilities;  // (batch, 10)
    Tensor logits;         // input of the softmax readout
    ForwardCache cache;
};

/// `batch` is (n, H, W, C) or (n, H*W*C). Eval mode never touches `rng`, which may be null.
ForwardResult forward(const Network& net, const Tensor& batch, Mode mode, RngStream* rng = nullptr);

/// Adds its gradient into `grads` and returns the penalty value.
using PenaltyFn = std::function<double(const ParamSet& params, ParamSet& grads)>;

struct LossAndGrads {
    double loss = 0.0;
    ParamSet grads;
};

/// Mean softmax cross-entropy over the batch, plus `penalty(params)` if given.
LossAndGrads loss_and_grads(const Network& net, const Tensor& batch, std::span<const int> labels,
                            const PenaltyFn& penalty = {}, Mode mode = Mode::Train,
                            RngStream* rng = nullptr);

/// Argmax class per row, lowest index on ties.
std::vector<int> predict(const Network& net, const Tensor& batch);

/// Fraction of argmax-correct predictions in eval mode, batched, partial last batch included.
double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t batch_size = 100);

/// LWTA over the trailing dimension: keep the first maximal entry of every block, zero the rest.
Tensor apply_lwta(const Tensor& pre_activations, std::size_t block_size = 2);

/// Inverted dropout. Eval mode (or rate 0) is the identity and draws nothing.
Tensor apply_dropout(const Tensor& activations, double drop_rate, Mode mode, RngStream* rng);

}  // namespace cfbench
