#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "icnn/errors.hpp"

namespace icnn {

/// Dense row-major float32 tensor; the value type passed between layers.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), 0.0f);
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor from_data(std::vector<int> shape, std::vector<float> data) {
        Tensor t;
        if (data.size() != checked_size(shape)) {
            throw DimensionError("tensor data length does not match shape product");
        }
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float& at3(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }
    float at3(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }
    float& at2(int r, int c) { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }
    float at2(int r, int c) const { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (float v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    /// Flat view with a new shape; element count must be unchanged.
    Tensor reshaped(std::vector<int> shape) const {
        return from_data(std::move(shape), data_);
    }

    void fill(float v) { data_.assign(data_.size(), v); }

private:
    static std::size_t checked_size(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw DimensionError("tensor extents must be positive");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<float> data_;
};

}  // namespace icnn
