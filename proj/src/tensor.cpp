#include "ggan/tensor.hpp"

#include <cmath>

#include "ggan/error.hpp"

namespace ggan {

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) {
        fail(ErrorKind::Numeric, "tensor data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_string(shape));
    }
}

std::span<const double> Tensor::slice(std::size_t i) const {
    const std::size_t stride = shape.empty() ? 0 : data.size() / shape[0];
    return {data.data() + i * stride, stride};
}

bool Tensor::all_finite() const {
    for (const double x : data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace ggan
