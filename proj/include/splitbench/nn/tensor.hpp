#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "splitbench/error.hpp"

namespace splitbench::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array tagged with its shape. Training runs on the float
// instantiation; the double one exists for the finite-difference oracle.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), T{0}) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_str(shape_) + " holds " +
                       std::to_string(shape_numel(shape_)) +
                       " elements, got " + std::to_string(data_.size()));
    }
  }

  // Checked construction: additionally rejects NaN and infinities.
  static BasicTensor checked(Shape shape, std::vector<T> data) {
    BasicTensor t(std::move(shape), std::move(data));
    if (!t.all_finite()) {
      throw Error("non_finite", "tensor contains NaN or infinite values");
    }
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  // Same data, new shape with the same element count.
  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace splitbench::nn
