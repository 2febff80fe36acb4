#include "cfbench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cfbench/errors.hpp"

namespace cfbench {

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(std::vector<std::size_t> s, double fill)
    : shape(std::move(s)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    if (shape_product(shape) != data.size())
        throw ConfigError("tensor data length does not match shape");
}

std::size_t Tensor::row_size() const noexcept {
    if (shape.empty())
        return 1;
    return shape[0] == 0 ? 0 : data.size() / shape[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

ParamSet zeros_like(const ParamSet& like) {
    ParamSet out;
    out.reserve(like.size());
    for (const auto& t : like)
        out.emplace_back(t.shape, 0.0);
    return out;
}

bool same_shapes(const ParamSet& a, const ParamSet& b) noexcept {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!a[i].same_shape(b[i]))
            return false;
    return true;
}

std::size_t total_size(const ParamSet& params) noexcept {
    std::size_t n = 0;
    for (const auto& t : params)
        n += t.size();
    return n;
}

}  // namespace cfbench
