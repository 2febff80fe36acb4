#include <doctest.h>

#include <cmath>

#include "cfbench/continual.hpp"
#include "cfbench/data.hpp"
#include "cfbench/errors.hpp"
#include "cfbench/optimizer.hpp"
#include "support.hpp"

using namespace cfbench;
using testing::check_gradients;
using testing::random_labels;
using testing::random_tensor;

namespace {

ParamSet scalar_params(std::vector<double> v) {
    const std::size_t n = v.size();
    return {Tensor({n}, std::move(v))};
}

FisherDiagonal scalar_fisher(std::vector<double> v) { return {scalar_params(std::move(v)), 1}; }

Network small_net(std::uint64_t seed, std::size_t width = 12) {
    RngStream rng(seed);
    return build_network(fc_layers(1, width), InputDims{1, 6, 1}, rng);
}

Dataset small_data(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    Tensor x = random_tensor({n, 1, 6, 1}, rng, 0.0, 1.0);
    return Dataset(std::move(x), random_labels(n, rng));
}

double sq_distance(const ParamSet& a, const ParamSet& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].size(); ++i)
            s += (a[t].data[i] - b[t].data[i]) * (a[t].data[i] - b[t].data[i]);
    return s;
}

}  // namespace

TEST_CASE("Fisher diagonal is nonnegative, shaped like the parameters and seeded") {
    const Network net = small_net(1);
    const Dataset data = small_data(40, 2);
    RngStream a(5), b(5);
    const FisherDiagonal f = estimate_fisher_diagonal(net, data, 100, a);
    const FisherDiagonal g = estimate_fisher_diagonal(net, data, 100, b);
    CHECK(same_shapes(f.values, net.params()));
    CHECK(f.samples == 100);
    CHECK(f.values == g.values);
    double total = 0.0;
    for (const auto& t : f.values)
        for (double v : t.data) {
            CHECK(v >= 0.0);
            total += v;
        }
    CHECK(total > 0.0);
    RngStream r(1);
    CHECK_THROWS_AS(estimate_fisher_diagonal(net, Dataset(), 10, r), DataError);
    CHECK_THROWS_AS(estimate_fisher_diagonal(net, data, 0, r), ConfigError);
}

TEST_CASE("Monte Carlo Fisher converges to the exact expectation") {
    const Network net = small_net(3);
    const Dataset one = small_data(1, 4);
    const FisherDiagonal exact = exact_fisher_single(net, one.images());
    RngStream rng(6);
    const FisherDiagonal mc = estimate_fisher_diagonal(net, one, 50000, rng);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < exact.values.size(); ++t)
        for (std::size_t i = 0; i < exact.values[t].size(); ++i) {
            num += std::abs(mc.values[t].data[i] - exact.values[t].data[i]);
            den += exact.values[t].data[i];
        }
    CHECK(num / den < 0.05);
}

TEST_CASE("exact Fisher matches its definition for one weight") {
    const Network net = small_net(7, 4);
    const Dataset one = small_data(1, 8);
    const FisherDiagonal exact = exact_fisher_single(net, one.images());
    const auto probs = forward(net, one.images(), Mode::Eval).probabilities;
    double expected = 0.0;
    for (int y = 0; y < 10; ++y) {
        const auto g = loss_and_grads(net, one.images(), std::vector<int>{y}, {}, Mode::Eval).grads;
        expected += probs.data[static_cast<std::size_t>(y)] * g[0].data[5] * g[0].data[5];
    }
    CHECK(exact.values[0].data[5] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("EWC penalty closed form and gradient") {
    EwcState s{scalar_params({0.0, 0.0, 0.0}), scalar_fisher({1.0, 1.0, 1.0}), 2.0};
    const PenaltyValue v = ewc_penalty(scalar_params({1.0, 1.0, 1.0}), s);
    CHECK(v.value == doctest::Approx(3.0).epsilon(1e-15));
    for (double g : v.grads[0].data)
        CHECK(g == doctest::Approx(2.0).epsilon(1e-15));

    EwcState s2{scalar_params({0.0, 0.0, 0.0}), scalar_fisher({1.0, 1.0, 1.0}), 2.0};
    CHECK(ewc_penalty(scalar_params({3.0, 0.0, 0.0}), s2).value == doctest::Approx(9.0));
    CHECK(ewc_penalty(scalar_params({1.0, 1.0, 2.0}), s2).value == doctest::Approx(6.0));

    CHECK_THROWS_AS(ewc_penalty(scalar_params({1.0}), s), ConfigError);
}

TEST_CASE("EWC penalty gradient against finite differences inside a network") {
    const Network net = small_net(11);
    RngStream rng(12);
    const Tensor x = random_tensor({5, 1, 6, 1}, rng, 0.0, 1.0);
    const auto y = random_labels(5, rng);
    EwcState s;
    s.anchor = small_net(13).params();
    s.fisher.values = zeros_like(net.params());
    for (auto& t : s.fisher.values)
        for (auto& v : t.data)
            v = rng.uniform(0.0, 2.0);
    s.lambda = 3.0;
    const auto check = check_gradients(net, x, y, make_ewc_penalty(s), Mode::Eval, RngStream(1), 200);
    CHECK(check.coords >= 100);
    CHECK(check.max_rel_err < 1e-5);
}

TEST_CASE("a huge EWC weight pins the parameters to the anchor") {
    const Network net = small_net(21);
    const Dataset data = small_data(50, 22);
    RngStream f(23);
    const FisherDiagonal fisher = estimate_fisher_diagonal(net, data, 200, f);
    auto drift = [&](double lambda) {
        Network n = net;
        EwcState s{net.params(), fisher, lambda};
        // Stable step size for the stiff quadratic: lr * lambda * max F < 2.
        double fmax = 0.0;
        for (const auto& t : fisher.values)
            for (double v : t.data)
                fmax = std::max(fmax, v);
        const double lr = std::min(0.1, 1.0 / (lambda * fmax + 1.0));
        auto opt = OptimizerState::for_params(n.params(), lr, 0.0);
        const PenaltyFn pen = lambda > 0 ? make_ewc_penalty(s) : PenaltyFn{};
        const Dataset other = small_data(50, 24);
        for (int step = 0; step < 50; ++step) {
            const auto lg = loss_and_grads(n, other.images(), other.labels(), pen, Mode::Eval);
            step_sgd_momentum(n.params(), lg.grads, opt);
        }
        // Distance measured in the Fisher metric, where the penalty acts.
        double d = 0.0;
        for (std::size_t t = 0; t < fisher.values.size(); ++t)
            for (std::size_t i = 0; i < fisher.values[t].size(); ++i) {
                const double delta = n.params()[t].data[i] - net.params()[t].data[i];
                d += fisher.values[t].data[i] * delta * delta;
            }
        return d;
    };
    CHECK(drift(1e6) < 1e-3 * drift(0.0));
}

TEST_CASE("mean and mode merges") {
    ImmState s;
    s.params1 = scalar_params({2.0, 1.0, -4.0});
    s.params2 = scalar_params({6.0, 3.0, 4.0});
    s.fisher1 = scalar_fisher({1.0, 1.0, 0.0});
    s.fisher2 = scalar_fisher({1.0, 3.0, 0.0});

    CHECK(imm_mean_merge(s, 0.25)[0].data[0] == 3.0);
    CHECK(imm_mean_merge(s, 0.0) == s.params1);
    CHECK(imm_mean_merge(s, 1.0) == s.params2);

    const ParamSet mode = imm_mode_merge(s, 0.5);
    // (0.5 * 1 * 1 + 0.5 * 3 * 3) / (0.5 + 1.5) = 2.5
    CHECK(mode[0].data[1] == doctest::Approx(2.5).epsilon(1e-7));
    CHECK(mode[0].data[0] == doctest::Approx(4.0).epsilon(1e-7));
    // Both Fisher entries zero: mean merge.
    CHECK(mode[0].data[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(imm_merge(s, 0.5, MergeVariant::Mean) == imm_mean_merge(s, 0.5));

    CHECK_THROWS_AS(imm_mean_merge(s, -0.1), ConfigError);
    CHECK_THROWS_AS(imm_mode_merge(s, 1.5), ConfigError);
    ImmState missing = s;
    missing.fisher2.reset();
    CHECK_THROWS_AS(imm_mode_merge(missing, 0.5), ConfigError);
    ImmState odd = s;
    odd.params2 = scalar_params({1.0});
    CHECK_THROWS_AS(imm_mean_merge(odd, 0.5), ConfigError);
}

TEST_CASE("merge identities on random networks") {
    RngStream rng(31);
    ImmState s;
    s.params1 = small_net(32).params();
    s.params2 = small_net(33).params();
    s.fisher1 = FisherDiagonal{zeros_like(s.params1), 1};
    s.fisher2 = FisherDiagonal{zeros_like(s.params1), 1};
    for (std::size_t t = 0; t < s.params1.size(); ++t)
        for (std::size_t i = 0; i < s.params1[t].size(); ++i) {
            const double f = rng.uniform(0.01, 1.0);
            s.fisher1->values[t].data[i] = f;
            s.fisher2->values[t].data[i] = f;
        }
    // Equal Fisher diagonals reduce mode to mean.
    for (double a : {0.0, 0.3, 0.5, 1.0}) {
        const auto mode = imm_mode_merge(s, a);
        const auto mean = imm_mean_merge(s, a);
        CHECK(std::sqrt(sq_distance(mode, mean)) < 1e-9);
    }
    // Merging a model with itself returns it.
    ImmState self = s;
    self.params2 = s.params1;
    for (double a : {0.0, 0.42, 1.0}) {
        CHECK(std::sqrt(sq_distance(imm_mode_merge(self, a), s.params1)) < 1e-12);
        CHECK(std::sqrt(sq_distance(imm_mean_merge(self, a), s.params1)) < 1e-12);
    }
    // A vanishing second Fisher keeps model 1 wherever F1 > 0.
    ImmState zero = s;
    zero.fisher2 = FisherDiagonal{zeros_like(s.params1), 1};
    CHECK(std::sqrt(sq_distance(imm_mode_merge(zero, 0.7), s.params1)) < 1e-4);
    // Mode endpoints equal the source models.
    CHECK(std::sqrt(sq_distance(imm_mode_merge(s, 0.0), s.params1)) < 1e-12);
    CHECK(std::sqrt(sq_distance(imm_mode_merge(s, 1.0), s.params2)) < 1e-12);
}

TEST_CASE("transfer initialisations") {
    const Network m1 = small_net(41);
    RngStream a(42), b(42);
    const TransferInit w = transfer_init(m1, TransferMode::Weight, a);
    CHECK(w.net.params() == m1.params());
    CHECK_FALSE(static_cast<bool>(w.penalty));
    CHECK(a.position() == 0);

    const TransferInit r = transfer_init(m1, TransferMode::Random, a);
    CHECK(r.net.params() != m1.params());
    CHECK(r.net.layers() == m1.layers());

    const TransferInit l2 = transfer_init(m1, TransferMode::L2, b);
    REQUIRE(static_cast<bool>(l2.penalty));
    CHECK(l2.net.params() == r.net.params());
    ParamSet grads = zeros_like(m1.params());
    CHECK(l2.penalty(m1.params(), grads) == 0.0);
    CHECK(total_size(grads) == total_size(m1.params()));

    const PenaltyValue v = l2_transfer_penalty(scalar_params({1.0, 2.0}), scalar_params({0.0, 0.0}));
    CHECK(v.value == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(v.grads[0].data[1] == doctest::Approx(0.04).epsilon(1e-15));

    RngStream rng(43);
    const Tensor x = random_tensor({4, 1, 6, 1}, rng, 0.0, 1.0);
    const auto check =
        check_gradients(l2.net, x, random_labels(4, rng), l2.penalty, Mode::Eval, RngStream(1), 200);
    CHECK(check.max_rel_err < 1e-5);

    CHECK(transfer_mode_from_string("weight") == TransferMode::Weight);
    CHECK(to_string(TransferMode::L2) == "l2");
    CHECK_THROWS_AS(transfer_mode_from_string("copy"), ConfigError);
}
