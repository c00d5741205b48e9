#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "airm/common.hpp"

namespace airm {

// Dense row-major tensor with value semantics. Rank up to 4 in practice.
// Layout conventions used across the project:
//   images   [C,H,W]
//   masks    [H,W]
//   matrices [rows,cols]
//   token grids [h*w, D] with flat index i = y*w + x
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(size_t(numel_of(shape_)), T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (int64_t(data_.size()) != numel_of(shape_))
            throw ShapeError("tensor data size does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    int ndim() const { return int(shape_.size()); }
    int dim(int i) const { return shape_[size_t(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    int64_t numel() const { return numel_of(shape_); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](int64_t i) { return data_[size_t(i)]; }
    const T& operator[](int64_t i) const { return data_[size_t(i)]; }

    // 2D access (rows, cols).
    T& at(int r, int c) { return data_[size_t(r) * shape_[1] + c]; }
    const T& at(int r, int c) const { return data_[size_t(r) * shape_[1] + c]; }

    // 3D access [c,h,w].
    T& at(int c, int y, int x) {
        return data_[(size_t(c) * shape_[1] + y) * shape_[2] + x];
    }
    const T& at(int c, int y, int x) const {
        return data_[(size_t(c) * shape_[1] + y) * shape_[2] + x];
    }

    void reshape_inplace(std::vector<int> shape) {
        if (numel_of(shape) != numel())
            throw ShapeError("reshape changes element count");
        shape_ = std::move(shape);
    }

    Tensor reshaped(std::vector<int> shape) const {
        Tensor t = *this;
        t.reshape_inplace(std::move(shape));
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out = Tensor<U>(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = U(data_[size_t(i)]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + "]";
    }

    static int64_t numel_of(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace airm
