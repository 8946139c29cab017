#pragma once

#include "latino/error.hpp"
#include "latino/tensor.hpp"

namespace latino {

// Binary (H,W) mask broadcast over channels. The measurement keeps the image
// shape with zeros at unobserved pixels, so apply, adjoint and pseudoinverse
// coincide.

inline void check_mask(const Array& m) {
  if (m.rank() != 2) throw ShapeError("mask must be (H,W), got " + shape_string(m.shape()));
  for (double v : m.values())
    if (v != 0.0 && v != 1.0) throw InvalidArgument("mask must be binary (0/1)");
}

inline Array mask_apply(const Array& x, const Array& m) {
  check_mask(m);
  if (x.height() != m.extent(0) || x.width() != m.extent(1))
    throw ShapeError("mask " + shape_string(m.shape()) + " does not match image " +
                     shape_string(x.shape()));
  Array out = x;
  const std::size_t n = m.size();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto p = out.plane(c);
    for (std::size_t i = 0; i < n; ++i) p[i] *= m[i];
  }
  return out;
}

inline Array mask_pseudoinverse(const Array& y, const Array& m) { return mask_apply(y, m); }

// Axis-aligned box of unobserved pixels (rows [top, top+h), cols [left, left+w)).
inline Array box_mask(std::size_t rows, std::size_t cols, std::size_t top, std::size_t left,
                      std::size_t h, std::size_t w) {
  Array m({rows, cols}, 1.0);
  for (std::size_t i = top; i < std::min(rows, top + h); ++i)
    for (std::size_t j = left; j < std::min(cols, left + w); ++j) m(i, j) = 0.0;
  return m;
}

}  // namespace latino
