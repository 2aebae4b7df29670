#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dfcnn {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when tensor shapes, channel counts or layer specs do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Shape of a rank-4 tensor in (batch, height, width, channels) order.
struct Shape {
  std::int64_t n = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t c = 0;

  [[nodiscard]] std::int64_t numel() const { return n * h * w * c; }
  [[nodiscard]] std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(h) + "," +
           std::to_string(w) + "," + std::to_string(c) + ")";
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NHWC tensor with row-major storage. Zero-sized dimensions are legal.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{}) : shape_(shape) {
    check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_.numel()), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != static_cast<std::size_t>(shape_.numel())) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::int64_t n() const { return shape_.n; }
  [[nodiscard]] std::int64_t h() const { return shape_.h; }
  [[nodiscard]] std::int64_t w() const { return shape_.w; }
  [[nodiscard]] std::int64_t c() const { return shape_.c; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] const std::vector<T>& vec() const { return data_; }

  [[nodiscard]] std::size_t offset(std::int64_t b, std::int64_t i,
                                   std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(((b * shape_.h + i) * shape_.w + j) * shape_.c + k);
  }

  T& operator()(std::int64_t b, std::int64_t i, std::int64_t j, std::int64_t k) {
    return data_[offset(b, i, j, k)];
  }
  const T& operator()(std::int64_t b, std::int64_t i, std::int64_t j,
                      std::int64_t k) const {
    return data_[offset(b, i, j, k)];
  }

  T& operator[](std::size_t idx) { return data_[idx]; }
  const T& operator[](std::size_t idx) const { return data_[idx]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  /// Same data reinterpreted under a shape with equal element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const {
    if (shape.numel() != shape_.numel()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return Tensor(shape, data_);
  }

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static void check_shape(const Shape& s) {
    if (s.n < 0 || s.h < 0 || s.w < 0 || s.c < 0) {
      throw ShapeError("negative tensor dimension in " + s.str());
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace dfcnn
