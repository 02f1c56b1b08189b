#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dplac/core/error.hpp"

namespace dplac::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using Vector = Eigen::VectorXd;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles. The shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, const std::vector<double>& values)
        : shape_(std::move(shape)), values_(values.begin(), values.end()) {
        if (shape_size(shape_) != values_.size()) {
            throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                             std::to_string(values_.size()) + " values");
        }
    }

    static Tensor zeros(Shape shape) {
        const auto n = shape_size(shape);
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_.assign(n, 0.0);
        return t;
    }

    static Tensor from_matrix(const RowMatrix& m) {
        Shape s{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
        return Tensor(std::move(s), std::vector<double>(m.data(), m.data() + m.size()));
    }

    static Tensor from_vector(std::span<const double> v) {
        return Tensor({v.size()}, std::vector<double>(v.begin(), v.end()));
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] double* data() noexcept { return values_.data(); }
    [[nodiscard]] const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Rank-2 view; a rank-1 tensor is viewed as a single row.
    [[nodiscard]] RowMatrixMap matrix() {
        auto [r, c] = rows_cols();
        return RowMatrixMap(values_.data(), r, c);
    }
    [[nodiscard]] ConstRowMatrixMap matrix() const {
        auto [r, c] = rows_cols();
        return ConstRowMatrixMap(values_.data(), r, c);
    }

    [[nodiscard]] bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    [[nodiscard]] std::pair<Eigen::Index, Eigen::Index> rows_cols() const {
        if (shape_.size() == 1) return {1, static_cast<Eigen::Index>(shape_[0])};
        if (shape_.size() == 2)
            return {static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
        throw ShapeError("matrix view needs rank 1 or 2, got " + shape_string(shape_));
    }

    Shape shape_;
    // Eigen picks its vectorized code path from the buffer address; a fixed
    // alignment keeps floating-point results identical from run to run.
    std::vector<double, Eigen::aligned_allocator<double>> values_;
};

}  // namespace dplac::nn
