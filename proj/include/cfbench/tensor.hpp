#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cfbench {

/// Dense row-major array of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);
    Tensor(std::vector<std::size_t> s, std::vector<double> values);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    /// Number of elements per leading index (product of shape[1..]).
    std::size_t row_size() const noexcept;

    std::span<double> row(std::size_t i) { return {data.data() + i * row_size(), row_size()}; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * row_size(), row_size()};
    }

    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape == other.shape; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept;

/// Trainable parameters (or any per-parameter quantity) in layer order.
using ParamSet = std::vector<Tensor>;

/// Zero-filled tensors with the shapes of `like`.
ParamSet zeros_like(const ParamSet& like);
bool same_shapes(const ParamSet& a, const ParamSet& b) noexcept;
std::size_t total_size(const ParamSet& params) noexcept;

}  // namespace cfbench
