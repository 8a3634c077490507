#pragma once

// Dense row-major tensor of 64-bit floats. Values are immutable once handed
// to the graph; all mutation happens on freshly owned copies.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "hpgan/common.hpp"

namespace hpgan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (const std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

class Tensor {
public:
    Tensor() : shape_{}, data_{0.0} {}

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_numel(shape_) != data_.size())
            throw ShapeError(strfmt("tensor: shape %s does not match %zu values", shape_str(shape_).c_str(),
                                    data_.size()));
    }

    static Tensor zeros(Shape shape) {
        const std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
    static Tensor full(Shape shape, double v) {
        const std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor vector(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }
    // rows x cols from row-major values
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    bool is_scalar() const { return numel() == 1 && rank() <= 1; }
    double scalar_value() const {
        if (!is_scalar()) throw ShapeError(strfmt("tensor: %s is not scalar", shape_str(shape_).c_str()));
        return data_[0];
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // 2-D access
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    bool all_finite() const {
        for (const double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace hpgan
