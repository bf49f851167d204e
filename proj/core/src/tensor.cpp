#include "dagevo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "dagevo/errors.hpp"

namespace dagevo {

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("tensor of shape " + shape_string(shape_) + " cannot hold " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace dagevo
