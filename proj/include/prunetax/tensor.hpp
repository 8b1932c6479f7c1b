#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "prunetax/common.hpp"

namespace prunetax {

// Dense row-major n-d array. Shapes use the [n, c, h, w] convention for
// activations and [out, in, kh, kw] for convolution weights.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      check(d > 0, strf("tensor dimension must be positive, got %d", d));
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), T(0));
  }

  Tensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check(numel() == static_cast<int64_t>(data_.size()),
          strf("tensor data length %zu does not match shape product %lld",
               data_.size(), static_cast<long long>(numel())));
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 4-d accessors for [n, c, h, w] layouts.
  T& at4(int n, int c, int h, int w) {
    return data_[idx4(n, c, h, w)];
  }
  const T& at4(int n, int c, int h, int w) const {
    return data_[idx4(n, c, h, w)];
  }
  size_t idx4(int n, int c, int h, int w) const {
    return static_cast<size_t>(
        ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    check(n == numel(), "reshape must preserve element count");
    shape_ = std::move(shape);
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

}  // namespace prunetax
