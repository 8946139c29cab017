#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>
#include <vector>

#include "latino/error.hpp"
#include "latino/tensor.hpp"

namespace latino {

// Orthonormal 1-D DCT-II matrix, row k = frequency k.
inline std::vector<double> dct_matrix(std::size_t n) {
  std::vector<double> m(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      m[k * n + i] = a * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
  }
  return m;
}

// Separable orthonormal 2-D DCT on (C,H,W) images with a truncated coefficient
// set. Coefficients are ordered by ky+kx, then ky, then channel, so the first
// d entries are the d coarsest ones.
class DctBasis {
 public:
  struct Index {
    std::size_t c, ky, kx;
  };

  DctBasis(Shape image_shape, std::size_t d)
      : shape_(std::move(image_shape)) {
    if (shape_.size() != 3) throw ShapeError("DCT basis needs a (C,H,W) shape");
    const std::size_t C = shape_[0], H = shape_[1], W = shape_[2];
    if (d == 0 || d > C * H * W)
      throw InvalidArgument("latent dim must lie in [1, " + std::to_string(C * H * W) + "]");
    my_ = dct_matrix(H);
    mx_ = dct_matrix(W);
    std::vector<Index> all;
    all.reserve(C * H * W);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t ky = 0; ky < H; ++ky)
        for (std::size_t kx = 0; kx < W; ++kx) all.push_back({c, ky, kx});
    std::stable_sort(all.begin(), all.end(), [](const Index& a, const Index& b) {
      return std::tuple(a.ky + a.kx, a.ky, a.c) < std::tuple(b.ky + b.kx, b.ky, b.c);
    });
    all.resize(d);
    index_ = std::move(all);
  }

  const Shape& image_shape() const noexcept { return shape_; }
  std::size_t dim() const noexcept { return index_.size(); }
  const std::vector<Index>& indices() const noexcept { return index_; }

  // Q x: full transform, then keep the selected coefficients.
  Array analyze(const Array& x) const {
    if (x.shape() != shape_)
      throw ShapeError("image " + shape_string(x.shape()) + " does not match prior " +
                       shape_string(shape_));
    const Array coef = transform(x, false);
    Array z({dim()});
    for (std::size_t i = 0; i < dim(); ++i) z[i] = coef(index_[i].c, index_[i].ky, index_[i].kx);
    return z;
  }

  // Q^T z.
  Array synthesize(const Array& z) const {
    if (z.shape() != Shape{dim()})
      throw ShapeError("latent " + shape_string(z.shape()) + " does not match dim " +
                       std::to_string(dim()));
    Array coef(shape_);
    for (std::size_t i = 0; i < dim(); ++i) coef(index_[i].c, index_[i].ky, index_[i].kx) = z[i];
    return transform(coef, true);
  }

 private:
  // Forward: M_y X M_x^T per channel. Inverse: M_y^T X M_x.
  Array transform(const Array& in, bool inverse) const {
    const std::size_t C = shape_[0], H = shape_[1], W = shape_[2];
    Array tmp(shape_), out(shape_);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t k = 0; k < W; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < W; ++j)
            acc += in(c, i, j) * (inverse ? mx_[j * W + k] : mx_[k * W + j]);
          tmp(c, i, k) = acc;
        }
      for (std::size_t k = 0; k < H; ++k)
        for (std::size_t j = 0; j < W; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < H; ++i)
            acc += (inverse ? my_[i * H + k] : my_[k * H + i]) * tmp(c, i, j);
          out(c, k, j) = acc;
        }
    }
    return out;
  }

  Shape shape_;
  std::vector<double> my_, mx_;
  std::vector<Index> index_;
};

}  // namespace latino
