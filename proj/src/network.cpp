#include "cfbench/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cfbench/data.hpp"
#include "cfbench/errors.hpp"

namespace cfbench {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// Lowers one (H, W, C) sample to an (H*W, k*k*C) patch matrix ('same' padding, stride 1).
void im2col(const double* in, const FeatureShape& shape, std::size_t k, RowMat& cols) {
    const auto h = static_cast<std::ptrdiff_t>(shape.height);
    const auto w = static_cast<std::ptrdiff_t>(shape.width);
    const auto c = static_cast<std::ptrdiff_t>(shape.channels);
    const auto kk = static_cast<std::ptrdiff_t>(k);
    const std::ptrdiff_t pad = (kk - 1) / 2;
    cols.setZero(h * w, kk * kk * c);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double* row = cols.row(y * w + x).data();
            for (std::ptrdiff_t ky = 0; ky < kk; ++ky) {
                const std::ptrdiff_t iy = y + ky - pad;
                if (iy < 0 || iy >= h)
                    continue;
                for (std::ptrdiff_t kx = 0; kx < kk; ++kx) {
                    const std::ptrdiff_t ix = x + kx - pad;
                    if (ix < 0 || ix >= w)
                        continue;
                    std::copy_n(in + (iy * w + ix) * c, c, row + (ky * kk + kx) * c);
                }
            }
        }
    }
}

void col2im_add(const RowMat& cols, const FeatureShape& shape, std::size_t k, double* out) {
    const auto h = static_cast<std::ptrdiff_t>(shape.height);
    const auto w = static_cast<std::ptrdiff_t>(shape.width);
    const auto c = static_cast<std::ptrdiff_t>(shape.channels);
    const auto kk = static_cast<std::ptrdiff_t>(k);
    const std::ptrdiff_t pad = (kk - 1) / 2;
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            const double* row = cols.row(y * w + x).data();
            for (std::ptrdiff_t ky = 0; ky < kk; ++ky) {
                const std::ptrdiff_t iy = y + ky - pad;
                if (iy < 0 || iy >= h)
                    continue;
                for (std::ptrdiff_t kx = 0; kx < kk; ++kx) {
                    const std::ptrdiff_t ix = x + kx - pad;
                    if (ix < 0 || ix >= w)
                        continue;
                    double* dst = out + (iy * w + ix) * c;
                    const double* src = row + (ky * kk + kx) * c;
                    for (std::ptrdiff_t ci = 0; ci < c; ++ci)
                        dst[ci] += src[ci];
                }
            }
        }
    }
}

void glorot_fill(Tensor& w, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.data)
        v = rng.uniform(-a, a);
}

void check_finite(const Tensor& t, std::size_t layer) {
    if (!t.all_finite())
        throw NumericalError("non-finite activation", static_cast<std::ptrdiff_t>(layer));
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = logits;
    const std::size_t n = logits.dim(0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = p.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (auto& v : row) {
            v = std::exp(v - m);
            sum += v;
        }
        for (auto& v : row)
            v /= sum;
    }
    return p;
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Lwta: return "lwta";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::SoftmaxReadout: return "softmax-readout";
    }
    return "?";
}

LayerSpec LayerSpec::dense(std::size_t width) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.width = width;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t filter_size) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.filters = filters;
    s.filter_size = filter_size;
    return s;
}

LayerSpec LayerSpec::maxpool2d(std::size_t pool, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2d;
    s.pool_size = pool;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::lwta(std::size_t block_size) {
    LayerSpec s;
    s.kind = LayerKind::Lwta;
    s.block_size = block_size;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.drop_rate = rate;
    return s;
}

LayerSpec LayerSpec::softmax_readout(std::size_t classes) {
    LayerSpec s;
    s.kind = LayerKind::SoftmaxReadout;
    s.width = classes;
    return s;
}

void Network::set_params(ParamSet params) {
    if (!same_shapes(params, params_))
        throw ConfigError("parameter shapes do not match the network");
    params_ = std::move(params);
}

Network build_network(const std::vector<LayerSpec>& spec, const InputDims& dims, RngStream& rng) {
    if (spec.empty() || spec.back().kind != LayerKind::SoftmaxReadout)
        throw ConfigError("layer chain must end with a softmax readout");
    if (spec.back().width != Network::kClasses)
        throw ConfigError("softmax readout must have 10 classes");
    if (dims.flat() == 0)
        throw ConfigError("input dimensions must be positive");

    Network net;
    net.layers_ = spec;
    net.input_ = dims;
    net.shapes_.push_back({dims.height, dims.width, dims.channels});

    for (std::size_t i = 0; i < spec.size(); ++i) {
        const LayerSpec& l = spec[i];
        const FeatureShape in = net.shapes_.back();
        FeatureShape out = in;
        std::ptrdiff_t widx = -1;
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
        switch (l.kind) {
            case LayerKind::Dense: {
                if (l.width == 0)
                    throw ConfigError(where + "width must be positive");
                out = {1, 1, l.width};
                widx = static_cast<std::ptrdiff_t>(net.params_.size());
                Tensor w({in.flat(), l.width});
                glorot_fill(w, in.flat(), l.width, rng);
                net.params_.push_back(std::move(w));
                net.params_.emplace_back(std::vector<std::size_t>{l.width}, 0.0);
                break;
            }
            case LayerKind::Conv2d: {
                if (l.filters == 0 || l.filter_size == 0 || l.filter_size % 2 == 0)
                    throw ConfigError(where + "needs positive filters and an odd filter size");
                if (in.height == 1 && in.width == 1 && i > 0)
                    throw ConfigError(where + "convolution after a flat layer");
                out = {in.height, in.width, l.filters};
                widx = static_cast<std::ptrdiff_t>(net.params_.size());
                const std::size_t k = l.filter_size;
                Tensor w({k, k, in.channels, l.filters});
                glorot_fill(w, k * k * in.channels, k * k * l.filters, rng);
                net.params_.push_back(std::move(w));
                net.params_.emplace_back(std::vector<std::size_t>{l.filters}, 0.0);
                break;
            }
            case LayerKind::MaxPool2d:
                if (l.pool_size == 0 || l.stride == 0)
                    throw ConfigError(where + "pool size and stride must be positive");
                if (in.height < l.pool_size || in.width < l.pool_size)
                    throw ConfigError(where + "input smaller than the pooling window");
                out = {(in.height - l.pool_size) / l.stride + 1,
                       (in.width - l.pool_size) / l.stride + 1, in.channels};
                break;
            case LayerKind::Relu:
                break;
            case LayerKind::Lwta:
                if (l.block_size == 0 || in.flat() % l.block_size != 0)
                    throw ConfigError(where + "block size " + std::to_string(l.block_size) +
                                      " does not divide width " + std::to_string(in.flat()));
                break;
            case LayerKind::Dropout:
                if (!(l.drop_rate >= 0.0 && l.drop_rate < 1.0))
                    throw ConfigError(where + "drop rate must be in [0, 1)");
                break;
            case LayerKind::SoftmaxReadout:
                if (i + 1 != spec.size())
                    throw ConfigError(where + "softmax readout must be the last layer");
                if (in.flat() != l.width)
                    throw ConfigError(where + "expects " + std::to_string(l.width) +
                                      " logits, got " + std::to_string(in.flat()));
                break;
        }
        net.weight_index_.push_back(widx);
        net.shapes_.push_back(out);
    }
    return net;
}

Network reinitialized(const Network& net, RngStream& rng) {
    return build_network(net.layers(), net.input_dims(), rng);
}

std::vector<LayerSpec> fc_layers(std::size_t hidden_layers, std::size_t width) {
    std::vector<LayerSpec> s;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        s.push_back(LayerSpec::dense(width));
        s.push_back(LayerSpec::relu());
    }
    s.push_back(LayerSpec::dense(Network::kClasses));
    s.push_back(LayerSpec::softmax_readout());
    return s;
}

std::vector<LayerSpec> dropout_fc_layers(std::size_t hidden_layers, std::size_t width,
                                         double input_rate, double hidden_rate) {
    std::vector<LayerSpec> s{LayerSpec::dropout(input_rate)};
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        s.push_back(LayerSpec::dense(width));
        s.push_back(LayerSpec::relu());
        s.push_back(LayerSpec::dropout(hidden_rate));
    }
    s.push_back(LayerSpec::dense(Network::kClasses));
    s.push_back(LayerSpec::softmax_readout());
    return s;
}

std::vector<LayerSpec> lwta_layers(std::size_t hidden_layers, std::size_t width,
                                   std::size_t block_size) {
    std::vector<LayerSpec> s;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        s.push_back(LayerSpec::dense(width));
        s.push_back(LayerSpec::lwta(block_size));
    }
    s.push_back(LayerSpec::dense(Network::kClasses));
    s.push_back(LayerSpec::softmax_readout());
    return s;
}

std::vector<LayerSpec> conv_layers(bool with_dropout, double dropout_rate) {
    std::vector<LayerSpec> s;
    auto drop = [&] {
        if (with_dropout)
            s.push_back(LayerSpec::dropout(dropout_rate));
    };
    drop();
    for (std::size_t filters : {32u, 64u}) {
        s.push_back(LayerSpec::conv2d(filters, 5));
        s.push_back(LayerSpec::relu());
        s.push_back(LayerSpec::maxpool2d(2, 2));
        drop();
    }
    s.push_back(LayerSpec::dense(1024));
    s.push_back(LayerSpec::relu());
    drop();
    s.push_back(LayerSpec::dense(Network::kClasses));
    s.push_back(LayerSpec::softmax_readout());
    return s;
}

Tensor apply_lwta(const Tensor& pre, std::size_t block_size) {
    const std::size_t width = pre.rank() <= 1 ? pre.size() : pre.shape.back();
    if (block_size == 0 || width % block_size != 0)
        throw ConfigError("lwta block size " + std::to_string(block_size) +
                          " does not divide width " + std::to_string(width));
    Tensor out(pre.shape, 0.0);
    for (std::size_t start = 0; start < pre.size(); start += block_size) {
        std::size_t win = start;
        for (std::size_t j = start + 1; j < start + block_size; ++j)
            if (pre.data[j] > pre.data[win])
                win = j;
        out.data[win] = pre.data[win];
    }
    return out;
}

Tensor apply_dropout(const Tensor& x, double rate, Mode mode, RngStream* rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("drop rate must be in [0, 1)");
    if (mode == Mode::Eval || rate == 0.0)
        return x;
    if (rng == nullptr)
        throw ConfigError("train-mode dropout needs a random stream");
    Tensor out = x;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& v : out.data)
        v = rng->uniform() < rate ? 0.0 : v * keep_scale;
    return out;
}

ForwardResult forward(const Network& net, const Tensor& batch, Mode mode, RngStream* rng) {
    const auto& layers = net.layers();
    const std::size_t n = batch.rank() == 0 ? 0 : batch.dim(0);
    if (n == 0 || batch.size() != n * net.input_dims().flat())
        throw ConfigError("batch shape does not match the network input dimensions");

    ForwardResult res;
    auto& cache = res.cache;
    cache.activations.reserve(layers.size() + 1);
    cache.indices.resize(layers.size());
    cache.masks.resize(layers.size());
    cache.activations.emplace_back(std::vector<std::size_t>{n, net.input_dims().flat()}, batch.data);

    const ParamSet& params = net.params();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        const Tensor& x = cache.activations.back();
        const FeatureShape& in = net.input_shape(li);
        const FeatureShape& outs = net.output_shape(li);
        Tensor y({n, outs.flat()});
        switch (l.kind) {
            case LayerKind::Dense: {
                const auto wi = static_cast<std::size_t>(net.weight_index(li));
                const Tensor& w = params[wi];
                const Tensor& b = params[wi + 1];
                auto ym = as_matrix(y, n, outs.flat());
                ym.noalias() = as_matrix(x, n, in.flat()) * as_matrix(w, in.flat(), outs.flat());
                ym.rowwise() += ConstVecMap(b.data.data(), static_cast<Eigen::Index>(b.size()));
                break;
            }
            case LayerKind::Conv2d: {
                const auto wi = static_cast<std::size_t>(net.weight_index(li));
                const std::size_t k = l.filter_size;
                const std::size_t patch = k * k * in.channels;
                auto wm = as_matrix(params[wi], patch, l.filters);
                ConstVecMap bias(params[wi + 1].data.data(), static_cast<Eigen::Index>(l.filters));
                RowMat cols;
                const std::size_t pixels = in.height * in.width;
                for (std::size_t s = 0; s < n; ++s) {
                    im2col(x.data.data() + s * in.flat(), in, k, cols);
                    MatMap ys(y.data.data() + s * outs.flat(), static_cast<Eigen::Index>(pixels),
                              static_cast<Eigen::Index>(l.filters));
                    ys.noalias() = cols * wm;
                    ys.rowwise() += bias;
                }
                break;
            }
            case LayerKind::MaxPool2d: {
                auto& idx = cache.indices[li];
                idx.resize(y.size());
                for (std::size_t s = 0; s < n; ++s) {
                    const double* src = x.data.data() + s * in.flat();
                    for (std::size_t oy = 0; oy < outs.height; ++oy)
                        for (std::size_t ox = 0; ox < outs.width; ++ox)
                            for (std::size_t c = 0; c < in.channels; ++c) {
                                std::size_t best = ((oy * l.stride) * in.width + ox * l.stride) *
                                                       in.channels + c;
                                for (std::size_t py = 0; py < l.pool_size; ++py)
                                    for (std::size_t px = 0; px < l.pool_size; ++px) {
                                        const std::size_t j =
                                            ((oy * l.stride + py) * in.width + ox * l.stride + px) *
                                                in.channels + c;
                                        if (src[j] > src[best])
                                            best = j;
                                    }
                                const std::size_t o =
                                    s * outs.flat() + (oy * outs.width + ox) * outs.channels + c;
                                y.data[o] = src[best];
                                idx[o] = static_cast<std::uint32_t>(best);
                            }
                }
                break;
            }
            case LayerKind::Relu:
                for (std::size_t j = 0; j < y.size(); ++j)
                    y.data[j] = x.data[j] > 0.0 ? x.data[j] : 0.0;
                break;
            case LayerKind::Lwta: {
                auto& idx = cache.indices[li];
                idx.resize(x.size() / l.block_size);
                std::fill(y.data.begin(), y.data.end(), 0.0);
                for (std::size_t b = 0; b < idx.size(); ++b) {
                    const std::size_t start = b * l.block_size;
                    std::size_t win = start;
                    for (std::size_t j = start + 1; j < start + l.block_size; ++j)
                        if (x.data[j] > x.data[win])
                            win = j;
                    idx[b] = static_cast<std::uint32_t>(win);
                    y.data[win] = x.data[win];
                }
                break;
            }
            case LayerKind::Dropout:
                if (mode == Mode::Train && l.drop_rate > 0.0) {
                    if (rng == nullptr)
                        throw ConfigError("train-mode dropout needs a random stream");
                    Tensor mask({n, in.flat()});
                    const double scale = 1.0 / (1.0 - l.drop_rate);
                    for (std::size_t j = 0; j < mask.size(); ++j) {
                        mask.data[j] = rng->uniform() < l.drop_rate ? 0.0 : scale;
                        y.data[j] = x.data[j] * mask.data[j];
                    }
                    cache.masks[li] = std::move(mask);
                } else {
                    y.data = x.data;
                }
                break;
            case LayerKind::SoftmaxReadout:
                res.logits = x;
                y = softmax_rows(x);
                break;
        }
        check_finite(y, li);
        cache.activations.push_back(std::move(y));
    }
    res.probabilities = cache.activations.back();
    return res;
}

LossAndGrads loss_and_grads(const Network& net, const Tensor& batch, std::span<const int> labels,
                            const PenaltyFn& penalty, Mode mode, RngStream* rng) {
    const std::size_t n = batch.rank() == 0 ? 0 : batch.dim(0);
    if (labels.size() != n)
        throw DataError("label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= static_cast<int>(Network::kClasses))
            throw DataError("label " + std::to_string(y) + " outside 0..9");

    ForwardResult fr = forward(net, batch, mode, rng);
    const auto& layers = net.layers();
    const auto& acts = fr.cache.activations;
    const std::size_t classes = Network::kClasses;

    LossAndGrads out;
    out.grads = zeros_like(net.params());

    // Cross-entropy from log-softmax for stability; dL/dlogits = (p - onehot) / n.
    Tensor delta({n, classes});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto z = fr.logits.row(i);
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z)
            sum += std::exp(v - m);
        const double lse = m + std::log(sum);
        loss -= z[static_cast<std::size_t>(labels[i])] - lse;
        auto p = fr.probabilities.row(i);
        for (std::size_t c = 0; c < classes; ++c)
            delta.data[i * classes + c] =
                (p[c] - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    const ParamSet& params = net.params();
    // Walk backwards, skipping the readout whose gradient is already in `delta`.
    for (std::size_t li = layers.size() - 1; li-- > 0;) {
        const LayerSpec& l = layers[li];
        const Tensor& x = acts[li];
        const FeatureShape& in = net.input_shape(li);
        const FeatureShape& outs = net.output_shape(li);
        const bool need_input_grad = li > 0;
        Tensor dx;
        switch (l.kind) {
            case LayerKind::Dense: {
                const auto wi = static_cast<std::size_t>(net.weight_index(li));
                auto dy = as_matrix(delta, n, outs.flat());
                auto xm = as_matrix(x, n, in.flat());
                as_matrix(out.grads[wi], in.flat(), outs.flat()).noalias() = xm.transpose() * dy;
                Eigen::Map<Eigen::RowVectorXd>(out.grads[wi + 1].data.data(),
                                               static_cast<Eigen::Index>(outs.flat())) =
                    dy.colwise().sum();
                if (need_input_grad) {
                    dx = Tensor({n, in.flat()});
                    as_matrix(dx, n, in.flat()).noalias() =
                        dy * as_matrix(params[wi], in.flat(), outs.flat()).transpose();
                }
                break;
            }
            case LayerKind::Conv2d: {
                const auto wi = static_cast<std::size_t>(net.weight_index(li));
                const std::size_t k = l.filter_size;
                const std::size_t patch = k * k * in.channels;
                const std::size_t pixels = in.height * in.width;
                auto wm = as_matrix(params[wi], patch, l.filters);
                auto dw = as_matrix(out.grads[wi], patch, l.filters);
                Eigen::Map<Eigen::RowVectorXd> db(out.grads[wi + 1].data.data(),
                                                  static_cast<Eigen::Index>(l.filters));
                if (need_input_grad)
                    dx = Tensor({n, in.flat()}, 0.0);
                RowMat cols;
                RowMat dcols;
                for (std::size_t s = 0; s < n; ++s) {
                    ConstMatMap dys(delta.data.data() + s * outs.flat(),
                                    static_cast<Eigen::Index>(pixels),
                                    static_cast<Eigen::Index>(l.filters));
                    im2col(x.data.data() + s * in.flat(), in, k, cols);
                    dw.noalias() += cols.transpose() * dys;
                    db += dys.colwise().sum();
                    if (need_input_grad) {
                        dcols.noalias() = dys * wm.transpose();
                        col2im_add(dcols, in, k, dx.data.data() + s * in.flat());
                    }
                }
                break;
            }
            case LayerKind::MaxPool2d: {
                dx = Tensor({n, in.flat()}, 0.0);
                const auto& idx = fr.cache.indices[li];
                for (std::size_t s = 0; s < n; ++s)
                    for (std::size_t o = 0; o < outs.flat(); ++o)
                        dx.data[s * in.flat() + idx[s * outs.flat() + o]] +=
                            delta.data[s * outs.flat() + o];
                break;
            }
            case LayerKind::Relu:
                dx = delta;
                for (std::size_t j = 0; j < dx.size(); ++j)
                    if (!(x.data[j] > 0.0))
                        dx.data[j] = 0.0;
                break;
            case LayerKind::Lwta: {
                dx = Tensor(delta.shape, 0.0);
                for (std::uint32_t w : fr.cache.indices[li])
                    dx.data[w] = delta.data[w];
                break;
            }
            case LayerKind::Dropout:
                dx = delta;
                if (!fr.cache.masks[li].data.empty())
                    for (std::size_t j = 0; j < dx.size(); ++j)
                        dx.data[j] *= fr.cache.masks[li].data[j];
                break;
            case LayerKind::SoftmaxReadout:
                throw ConfigError("softmax readout must be the last layer");
        }
        if (!need_input_grad)
            break;
        delta = std::move(dx);
    }

    if (penalty)
        loss += penalty(params, out.grads);
    if (!std::isfinite(loss))
        throw NumericalError("non-finite loss", -1);
    out.loss = loss;
    return out;
}

std::vector<int> predict(const Network& net, const Tensor& batch) {
    const Tensor p = forward(net, batch, Mode::Eval).probabilities;
    std::vector<int> out(p.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = p.row(i);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.empty())
        throw DataError("cannot evaluate on an empty dataset");
    if (batch_size == 0)
        throw ConfigError("batch size must be positive");
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        idx.resize(end - start);
        for (std::size_t i = start; i < end; ++i)
            idx[i - start] = i;
        const auto pred = predict(net, data.gather(idx));
        for (std::size_t i = start; i < end; ++i)
            correct += pred[i - start] == data.labels()[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace cfbench
