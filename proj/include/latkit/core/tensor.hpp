#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "latkit/core/errors.hpp"

namespace latkit {

using i64 = std::int64_t;

i64 numel_of(const std::vector<i64>& shape);

// Dense row-major double tensor, owning and contiguous. Heavy lifting happens
// in the kernels on raw pointers; this class only manages shape and storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<i64> shape)
        : shape_(std::move(shape)), data_(static_cast<size_t>(numel_of(shape_)), 0.0) {}

    static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<i64> shape, double v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    const std::vector<i64>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    i64 dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    i64 numel() const { return static_cast<i64>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](i64 i) { return data_[static_cast<size_t>(i)]; }
    double operator[](i64 i) const { return data_[static_cast<size_t>(i)]; }

    double& at(i64 i, i64 j) {
        assert(rank() == 2);
        return data_[static_cast<size_t>(i * shape_[1] + j)];
    }
    double at(i64 i, i64 j) const { return const_cast<Tensor*>(this)->at(i, j); }
    double& at(i64 i, i64 j, i64 k) {
        assert(rank() == 3);
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double& at(i64 i, i64 j, i64 k, i64 l) {
        assert(rank() == 4);
        return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    // Reinterpret the same elements under a new shape.
    void set_shape(std::vector<i64> shape) {
        if (numel_of(shape) != numel())
            throw ShapeError("set_shape: element count mismatch");
        shape_ = std::move(shape);
    }
    Tensor reshaped(std::vector<i64> shape) const {
        Tensor t = *this;
        t.set_shape(std::move(shape));
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<i64> shape_;
    std::vector<double> data_;
};

}  // namespace latkit
