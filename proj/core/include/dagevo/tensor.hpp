#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dagevo {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Activations use the (batch, time,
/// channels) layout; weights use whatever rank they need.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Element (b, t, c) of a rank-3 tensor.
    double& at(std::size_t b, std::size_t t, std::size_t c) {
        return data_[(b * shape_[1] + t) * shape_[2] + c];
    }
    const double& at(std::size_t b, std::size_t t, std::size_t c) const {
        return data_[(b * shape_[1] + t) * shape_[2] + c];
    }

    /// Same data, new shape with equal element count. Throws ShapeError otherwise.
    Tensor reshaped(Shape shape) const;

    void fill(double value);
    bool all_finite() const;

    bool operator==(const Tensor&) const = default;

  private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace dagevo
