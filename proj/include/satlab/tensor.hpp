#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "satlab/errors.hpp"

namespace satlab {

/// NCHW extent. Vectors such as logits use {n, k, 1, 1}.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t per_sample() const { return c * h * w; }
  std::size_t spatial() const { return h * w; }
  Shape with_batch(std::size_t batch) const { return {batch, c, h, w}; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w) + ")";
}

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<T> sample(std::size_t i) {
    return std::span<T>(data_).subspan(i * shape_.per_sample(), shape_.per_sample());
  }
  std::span<const T> sample(std::size_t i) const {
    return std::span<const T>(data_).subspan(i * shape_.per_sample(), shape_.per_sample());
  }

  /// Same storage, new extent with an equal element count.
  Tensor reshaped(Shape s) const {
    if (s.size() != shape_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(s));
    }
    return Tensor(s, data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void add_scaled(const Tensor& other, T scale) {
    require_same_shape(other, "add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void require_same_shape(const Tensor& other, const char* op) const {
    if (!(other.shape_ == shape_)) {
      throw ShapeError(std::string("shape mismatch in ") + op + ": " + to_string(shape_) + " vs " +
                       to_string(other.shape_));
    }
  }

  Shape shape_{};
  std::vector<T> data_;
};

/// Images in normalized pixel space [-1, +1] with integer labels.
template <typename T>
struct ImageBatch {
  Tensor<T> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }

  /// Throws when the batch breaks the pixel-range or label contract.
  void validate(int num_classes) const {
    if (pixels.shape().n != labels.size()) {
      throw ShapeError("batch has " + std::to_string(pixels.shape().n) + " images but " +
                       std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw DataError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      T v = pixels[i];
      if (!(v >= T(-1) && v <= T(1))) {
        throw DataError("pixel " + std::to_string(i) + " = " + std::to_string(double(v)) +
                        " outside normalized range [-1, 1]");
      }
    }
  }

  template <typename U>
  ImageBatch<U> cast() const {
    return {pixels.template cast<U>(), labels};
  }
};

/// sign with sign(0) = 0, so zero-gradient coordinates stay fixed under signed steps.
template <typename T>
constexpr T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

/// Largest absolute per-coordinate difference of one sample.
template <typename T>
double linf_distance(std::span<const T> a, std::span<const T> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(double(a[i]) - double(b[i])));
  return d;
}

}  // namespace satlab
