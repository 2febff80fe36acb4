#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cfbench/data.hpp"
#include "cfbench/network.hpp"
#include "cfbench/rng.hpp"

namespace testing {

using namespace cfbench;

inline Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape), 0.0);
    for (auto& v : t.data)
        v = rng.uniform(lo, hi);
    return t;
}

inline std::vector<int> random_labels(std::size_t n, RngStream& rng) {
    std::vector<int> y(n);
    for (auto& v : y)
        v = static_cast<int>(rng.below(10));
    return y;
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t coords = 0;
};

/// Central finite differences of the loss against loss_and_grads, on up to
/// `max_coords` coordinates per parameter tensor. Train-mode randomness is
/// replayed from a copy of `rng` for every evaluation, so dropout masks are fixed.
inline GradCheck check_gradients(const Network& net, const Tensor& x, const std::vector<int>& y,
                                 const PenaltyFn& penalty = {}, Mode mode = Mode::Eval,
                                 RngStream rng = RngStream(11), std::size_t max_coords = 60,
                                 double h = 1e-6) {
    RngStream r0 = rng;
    const auto analytic = loss_and_grads(net, x, y, penalty, mode, &r0).grads;
    GradCheck out;
    RngStream pick(99);
    for (std::size_t t = 0; t < net.params().size(); ++t) {
        const std::size_t n = net.params()[t].size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        if (n > max_coords) {
            pick.shuffle(std::span<std::size_t>(idx));
            idx.resize(max_coords);
        }
        for (std::size_t i : idx) {
            Network plus = net, minus = net;
            plus.params()[t].data[i] += h;
            minus.params()[t].data[i] -= h;
            RngStream rp = rng, rm = rng;
            const double lp = loss_and_grads(plus, x, y, penalty, mode, &rp).loss;
            const double lm = loss_and_grads(minus, x, y, penalty, mode, &rm).loss;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[t].data[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            out.max_rel_err = std::max(out.max_rel_err, std::abs(a - numeric) / denom);
            ++out.coords;
        }
    }
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        RngStream r(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
        path_ = std::filesystem::temp_directory_path() /
                ("cfbench-" + tag + "-" + std::to_string(r.next_u64() % 1000000007ULL));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Well separated blobs: every class learnable to ~100% in a few epochs.
inline DatasetPair easy_blobs(std::size_t per_class = 40, std::size_t test_per_class = 20,
                              std::uint64_t seed = 3) {
    BlobParams p;
    p.n_per_class = per_class;
    p.dims = 16;
    p.separation = 10.0;
    p.cluster_std = 0.05;
    RngStream rng(seed);
    return synthetic_blob_splits(p, test_per_class, rng);
}

}  // namespace testing
