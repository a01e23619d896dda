#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ggan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    std::size_t dim(std::size_t axis) const { return shape.at(axis); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    std::span<double> span() { return data; }
    std::span<const double> span() const { return data; }

    /// Elements of slice `i` along the leading axis.
    std::span<const double> slice(std::size_t i) const;

    bool all_finite() const;

    bool operator==(const Tensor&) const = default;
};

}  // namespace ggan
