#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latino/error.hpp"

namespace latino {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Dense n-dimensional array, row-major. Images use (C,H,W), kernels (H,W),
// latents and conditioning vectors (d).
//
// Construction from explicit data checks that the extents are positive, that
// the element count matches, and that every entry is finite. Arithmetic on an
// existing tensor is not re-validated.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v)))
        throw InvalidArgument("tensor entries must be finite");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // (C,H,W) accessors.
  std::size_t channels() const { return image_axis(0); }
  std::size_t height() const { return image_axis(1); }
  std::size_t width() const { return image_axis(2); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  const T& operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  // Plane `c` of a (C,H,W) tensor.
  std::span<T> plane(std::size_t c) {
    const std::size_t n = shape_[1] * shape_[2];
    return std::span<T>(data_).subspan(c * n, n);
  }
  std::span<const T> plane(std::size_t c) const {
    const std::size_t n = shape_[1] * shape_[2];
    return std::span<const T>(data_).subspan(c * n, n);
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
    BasicTensor out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  BasicTensor& operator+=(const BasicTensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  BasicTensor& operator-=(const BasicTensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  BasicTensor& operator*=(T s) {
    for (T& v : data_) v *= s;
    return *this;
  }

  friend BasicTensor operator+(BasicTensor a, const BasicTensor& b) { return a += b; }
  friend BasicTensor operator-(BasicTensor a, const BasicTensor& b) { return a -= b; }
  friend BasicTensor operator*(BasicTensor a, T s) { return a *= s; }
  friend BasicTensor operator*(T s, BasicTensor a) { return a *= s; }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  // y += alpha * x
  BasicTensor& axpy(T alpha, const BasicTensor& x) {
    check_same(x);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * x.data_[i];
    return *this;
  }

  void check_same(const BasicTensor& o) const {
    if (o.shape_ != shape_)
      throw ShapeError("shape mismatch " + shape_string(shape_) + " vs " +
                       shape_string(o.shape_));
  }

 private:
  static std::size_t checked_size(const Shape& shape) {
    for (std::size_t e : shape)
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    return shape_size(shape);
  }

  std::size_t image_axis(std::size_t axis) const {
    if (shape_.size() != 3)
      throw ShapeError("expected a (C,H,W) tensor, got " + shape_string(shape_));
    return shape_[axis];
  }

  Shape shape_;
  std::vector<T> data_;
};

// 32-bit storage used for files, images and the prior wire protocol.
using Tensor = BasicTensor<float>;
// Working precision for all numerics.
using Array = BasicTensor<double>;

template <class To, class From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& in) {
  std::vector<To> out(in.size());
  std::transform(in.values().begin(), in.values().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return BasicTensor<To>(in.shape(), std::move(out));
}

template <class T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <class T>
double squared_norm(const BasicTensor<T>& a) {
  double s = 0.0;
  for (T v : a.values()) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

template <class T>
double norm(const BasicTensor<T>& a) {
  return std::sqrt(squared_norm(a));
}

template <class T>
double distance(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

template <class T>
double max_abs(const BasicTensor<T>& a) {
  double m = 0.0;
  for (T v : a.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <class T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  a.check_same(b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <class T>
bool all_finite(const BasicTensor<T>& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](T v) { return std::isfinite(static_cast<double>(v)); });
}

inline Array clamp(Array x, double lo, double hi) {
  for (double& v : x.values()) v = std::clamp(v, lo, hi);
  return x;
}

inline Array hadamard(Array a, const Array& b) {
  a.check_same(b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return a;
}

}  // namespace latino
