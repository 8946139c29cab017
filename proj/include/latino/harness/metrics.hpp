#pragma once

#include <cmath>

#include "latino/error.hpp"
#include "latino/tensor.hpp"

namespace latino {

inline constexpr double kPsnrCap = 100.0;

template <class T>
double mse(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mse: shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  if (a.empty()) throw InvalidArgument("mse of empty tensors");
  const double d = distance(a, b);
  return d * d / static_cast<double>(a.size());
}

// -10 log10(MSE) for images on [0,1]; identical inputs give the 100 dB cap.
template <class T>
double psnr(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

}  // namespace latino
