#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace vcmesh {

// Dense row-major tensor of doubles. Rank is arbitrary, but most of the code
// treats a tensor as a matrix: dim 0 is the row axis and everything behind it
// is flattened into the row width.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0);
    }

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, double v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    static Tensor from(std::vector<int64_t> shape, std::vector<double> values) {
        Tensor t;
        t.shape_ = std::move(shape);
        assert(count(t.shape_) == static_cast<int64_t>(values.size()));
        t.data_ = std::move(values);
        return t;
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    // matrix view: rows = dim 0, cols = everything else
    int64_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    int64_t cols() const { return rows() == 0 ? 0 : numel() / rows(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator()(int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator()(int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& operator()(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols() + j)]; }
    double operator()(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols() + j)]; }
    double& at3(int64_t i, int64_t j, int64_t k) {
        assert(rank() == 3);
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at3(int64_t i, int64_t j, int64_t k) const {
        assert(rank() == 3);
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

}  // namespace vcmesh
