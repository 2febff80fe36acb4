#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cfbench/data.hpp"
#include "cfbench/errors.hpp"
#include "cfbench/network.hpp"
#include "support.hpp"

using namespace cfbench;
using testing::check_gradients;
using testing::random_labels;
using testing::random_tensor;

namespace {

// Direct 'same' convolution, written independently of the im2col path.
std::vector<double> naive_conv(const std::vector<double>& in, std::size_t h, std::size_t w,
                               std::size_t cin, const Tensor& weight, const Tensor& bias,
                               std::size_t k, std::size_t cout) {
    std::vector<double> out(h * w * cout, 0.0);
    const int pad = static_cast<int>(k / 2);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t f = 0; f < cout; ++f) {
                double acc = bias.data[f];
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const int iy = static_cast<int>(y + ky) - pad;
                        const int ix = static_cast<int>(x + kx) - pad;
                        if (iy < 0 || ix < 0 || iy >= static_cast<int>(h) || ix >= static_cast<int>(w))
                            continue;
                        for (std::size_t c = 0; c < cin; ++c)
                            acc += in[(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin + c] *
                                   weight.data[((ky * k + kx) * cin + c) * cout + f];
                    }
                out[(y * w + x) * cout + f] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("glorot init stays inside the uniform bound and zeroes biases") {
    RngStream rng(1);
    const Network net = build_network(fc_layers(2, 30), InputDims{1, 16, 1}, rng);
    const std::size_t fans[][2] = {{16, 30}, {30, 30}, {30, 10}};
    for (std::size_t l = 0; l < 3; ++l) {
        const Tensor& w = net.params()[2 * l];
        const Tensor& b = net.params()[2 * l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fans[l][0] + fans[l][1]));
        CHECK(w.shape == std::vector<std::size_t>{fans[l][0], fans[l][1]});
        double lo = 1e9, hi = -1e9;
        for (double v : w.data) {
            CHECK(std::abs(v) <= a);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo < -0.8 * a);
        CHECK(hi > 0.8 * a);
        for (double v : b.data)
            CHECK(v == 0.0);
    }
}

TEST_CASE("same seed builds identical networks, different seeds differ") {
    RngStream a(5), b(5), c(6);
    const auto spec = fc_layers(2, 20);
    const Network na = build_network(spec, InputDims{4, 4, 1}, a);
    const Network nb = build_network(spec, InputDims{4, 4, 1}, b);
    const Network nc = build_network(spec, InputDims{4, 4, 1}, c);
    CHECK(na.params() == nb.params());
    CHECK_FALSE(na.params() == nc.params());
}

TEST_CASE("layer chain validation") {
    RngStream rng(1);
    const InputDims flat{1, 12, 1};
    CHECK_THROWS_AS(build_network({LayerSpec::dense(10)}, flat, rng), ConfigError);
    CHECK_THROWS_AS(build_network({LayerSpec::dense(7), LayerSpec::softmax_readout()}, flat, rng),
                    ConfigError);
    CHECK_THROWS_AS(build_network({LayerSpec::dense(9), LayerSpec::lwta(2), LayerSpec::dense(10),
                                   LayerSpec::softmax_readout()},
                                  flat, rng),
                    ConfigError);
    CHECK_THROWS_AS(build_network({LayerSpec::conv2d(4, 4), LayerSpec::dense(10),
                                   LayerSpec::softmax_readout()},
                                  InputDims{6, 6, 1}, rng),
                    ConfigError);
    CHECK_THROWS_AS(build_network({LayerSpec::dropout(1.0), LayerSpec::dense(10),
                                   LayerSpec::softmax_readout()},
                                  flat, rng),
                    ConfigError);
    CHECK_THROWS_AS(build_network({LayerSpec::dense(10), LayerSpec::softmax_readout(),
                                   LayerSpec::relu()},
                                  flat, rng),
                    ConfigError);
    CHECK_NOTHROW(build_network(lwta_layers(2, 8, 2), flat, rng));
}

TEST_CASE("softmax rows sum to one, also for extreme logits") {
    RngStream rng(2);
    const Network net = build_network(fc_layers(2, 16), InputDims{1, 12, 1}, rng);
    for (double scale : {1.0, 100.0, 1e4}) {
        const Tensor x = random_tensor({7, 12}, rng, -scale, scale);
        const Tensor p = forward(net, x, Mode::Eval).probabilities;
        for (std::size_t i = 0; i < 7; ++i) {
            double s = 0.0;
            for (double v : p.row(i)) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("gradient checks for every layer kind") {
    RngStream rng(3);
    SUBCASE("dense + relu") {
        const Network net = build_network(fc_layers(2, 6), InputDims{1, 5, 1}, rng);
        const auto g = check_gradients(net, random_tensor({4, 5}, rng), random_labels(4, rng));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
    SUBCASE("dense + lwta") {
        const Network net = build_network(lwta_layers(2, 8, 2), InputDims{1, 5, 1}, rng);
        const auto g = check_gradients(net, random_tensor({4, 5}, rng), random_labels(4, rng));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
    SUBCASE("lwta with block size 4") {
        const Network net = build_network(lwta_layers(1, 12, 4), InputDims{1, 6, 1}, rng);
        const auto g = check_gradients(net, random_tensor({3, 6}, rng), random_labels(3, rng));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
    SUBCASE("dropout with a fixed mask") {
        const Network net = build_network(dropout_fc_layers(2, 10, 0.2, 0.5), InputDims{1, 6, 1}, rng);
        const auto g = check_gradients(net, random_tensor({4, 6}, rng), random_labels(4, rng), {},
                                       Mode::Train, RngStream(17));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
    SUBCASE("conv + relu + maxpool") {
        const std::vector<LayerSpec> spec{LayerSpec::conv2d(3, 3), LayerSpec::relu(),
                                          LayerSpec::maxpool2d(2, 2), LayerSpec::dense(10),
                                          LayerSpec::softmax_readout()};
        const Network net = build_network(spec, InputDims{6, 6, 2}, rng);
        const auto g = check_gradients(net, random_tensor({2, 6, 6, 2}, rng), random_labels(2, rng));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
    SUBCASE("5x5 conv stack with dropout, as in the convolutional presets") {
        const std::vector<LayerSpec> spec{
            LayerSpec::dropout(0.5), LayerSpec::conv2d(2, 5), LayerSpec::relu(),
            LayerSpec::maxpool2d(2, 2), LayerSpec::conv2d(3, 5), LayerSpec::relu(),
            LayerSpec::maxpool2d(2, 2), LayerSpec::dropout(0.5), LayerSpec::dense(12),
            LayerSpec::relu(), LayerSpec::dense(10), LayerSpec::softmax_readout()};
        const Network net = build_network(spec, InputDims{8, 8, 1}, rng);
        const auto g = check_gradients(net, random_tensor({2, 8, 8, 1}, rng, 0.0, 1.0),
                                       random_labels(2, rng), {}, Mode::Train, RngStream(23));
        CHECK(g.coords >= 100);
        CHECK(g.max_rel_err < 1e-4);
    }
}

TEST_CASE("convolution and pooling match direct loops") {
    RngStream rng(4);
    const std::vector<LayerSpec> spec{LayerSpec::conv2d(3, 5), LayerSpec::maxpool2d(2, 2),
                                      LayerSpec::dense(10), LayerSpec::softmax_readout()};
    Network net = build_network(spec, InputDims{6, 8, 2}, rng);
    for (auto& v : net.params()[1].data)
        v = rng.uniform(-0.5, 0.5);
    const Tensor x = random_tensor({2, 6, 8, 2}, rng);
    const auto res = forward(net, x, Mode::Eval);
    CHECK(net.output_shape(0).height == 6);
    CHECK(net.output_shape(0).width == 8);
    CHECK(net.output_shape(1).height == 3);
    CHECK(net.output_shape(1).width == 4);
    for (std::size_t s = 0; s < 2; ++s) {
        const auto row = x.row(s);
        const auto conv = naive_conv(std::vector<double>(row.begin(), row.end()), 6, 8, 2,
                                     net.params()[0], net.params()[1], 5, 3);
        const auto got = res.cache.activations[1].row(s);
        for (std::size_t i = 0; i < conv.size(); ++i)
            CHECK(got[i] == doctest::Approx(conv[i]).epsilon(1e-12));
        const auto pooled = res.cache.activations[2].row(s);
        for (std::size_t oy = 0; oy < 3; ++oy)
            for (std::size_t ox = 0; ox < 4; ++ox)
                for (std::size_t c = 0; c < 3; ++c) {
                    double m = -1e300;
                    for (std::size_t py = 0; py < 2; ++py)
                        for (std::size_t px = 0; px < 2; ++px)
                            m = std::max(m, conv[((2 * oy + py) * 8 + 2 * ox + px) * 3 + c]);
                    CHECK(pooled[(oy * 4 + ox) * 3 + c] == doctest::Approx(m).epsilon(1e-12));
                }
    }
}

TEST_CASE("lwta keeps exactly one winner per block") {
    RngStream rng(5);
    for (std::size_t block : {2u, 3u, 4u}) {
        const Tensor pre = random_tensor({5, 12}, rng);
        const Tensor out = apply_lwta(pre, block);
        for (std::size_t start = 0; start < pre.size(); start += block) {
            std::size_t nonzero = 0;
            double maxv = -1e300;
            for (std::size_t j = start; j < start + block; ++j)
                maxv = std::max(maxv, pre.data[j]);
            for (std::size_t j = start; j < start + block; ++j)
                if (out.data[j] != 0.0) {
                    ++nonzero;
                    CHECK(out.data[j] == maxv);
                }
            CHECK(nonzero == 1);
        }
    }
    SUBCASE("ties go to the first unit, losers are zero even when negative") {
        const Tensor out = apply_lwta(Tensor({1, 6}, {3.0, 3.0, -1.0, -2.0, 0.5, 0.7}), 2);
        CHECK(out.data == std::vector<double>{3.0, 0.0, -1.0, 0.0, 0.0, 0.7});
    }
    CHECK_THROWS_AS(apply_lwta(Tensor({1, 5}, 0.0), 2), ConfigError);
}

TEST_CASE("dropout") {
    RngStream rng(6);
    const Tensor ones({200, 50}, 1.0);
    SUBCASE("eval mode and rate 0 are the identity and draw nothing") {
        RngStream r(1);
        CHECK(apply_dropout(ones, 0.5, Mode::Eval, &r) == ones);
        CHECK(apply_dropout(ones, 0.0, Mode::Train, &r) == ones);
        CHECK(r.position() == 0);
    }
    SUBCASE("inverted scaling preserves the expectation") {
        const Tensor d = apply_dropout(ones, 0.5, Mode::Train, &rng);
        double sum = 0.0;
        std::size_t zeros = 0;
        for (double v : d.data) {
            CHECK((v == 0.0 || v == doctest::Approx(2.0)));
            zeros += v == 0.0;
            sum += v;
        }
        const double n = static_cast<double>(d.size());
        // 10000 Bernoulli(0.5) draws: 5 sigma is 250.
        CHECK(std::abs(static_cast<double>(zeros) - n / 2) < 250.0);
        CHECK(std::abs(sum / n - 1.0) < 0.05);
    }
    CHECK_THROWS_AS(apply_dropout(ones, 0.5, Mode::Train, nullptr), ConfigError);
}

TEST_CASE("predict breaks ties toward the lowest class") {
    RngStream rng(7);
    Network net = build_network(fc_layers(1, 4), InputDims{1, 3, 1}, rng);
    ParamSet zero = zeros_like(net.params());
    net.set_params(zero);
    const auto y = predict(net, Tensor({3, 3}, 0.7));
    CHECK(y == std::vector<int>{0, 0, 0});
}

TEST_CASE("numerical and data errors") {
    RngStream rng(8);
    const Network net = build_network(fc_layers(1, 4), InputDims{1, 3, 1}, rng);
    Tensor bad({1, 3}, 0.1);
    bad.data[1] = std::nan("");
    try {
        forward(net, bad, Mode::Eval);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(e.layer() == 0);
    }
    const std::vector<int> label{10};
    CHECK_THROWS_AS(loss_and_grads(net, Tensor({1, 3}, 0.1), label), DataError);
    CHECK_THROWS_AS(evaluate_accuracy(net, Dataset()), DataError);
    CHECK_THROWS_AS(forward(net, Tensor({1, 4}, 0.1), Mode::Eval), ConfigError);
}

TEST_CASE("evaluate_accuracy counts a partial last batch") {
    RngStream rng(9);
    const auto blobs = testing::easy_blobs(13, 5);
    const Network net = build_network(fc_layers(1, 8), blobs.train.dims(), rng);
    const auto pred = predict(net, blobs.train.images());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hits += pred[i] == blobs.train.labels()[i];
    const double expected = static_cast<double>(hits) / static_cast<double>(pred.size());
    CHECK(evaluate_accuracy(net, blobs.train, 100) == expected);
    CHECK(evaluate_accuracy(net, blobs.train, 7) == expected);
}
