#pragma once

#include <complex>

#include "latino/error.hpp"
#include "latino/fft.hpp"
#include "latino/tensor.hpp"

namespace latino {

inline void check_single_channel(const Array& x) {
  if (x.rank() != 3 || x.channels() != 1)
    throw ShapeError("phase retrieval needs a single-channel (1,H,W) image, got " +
                     shape_string(x.shape()));
}

// |DFT(x)|, unnormalized transform.
inline Array phase_retrieval_apply(const Array& x) {
  check_single_channel(x);
  const auto spec = fft::forward_real(x.plane(0), x.height(), x.width());
  Array out(x.shape());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = std::abs(spec[i]);
  return out;
}

// Vector-Jacobian product of |DFT(.)| at x applied to a cotangent r:
// Re(F^H [r * F x / |F x|]). Bins with |F x| = 0 contribute 0 (subgradient).
inline Array phase_retrieval_vjp(const Array& x, const Array& r) {
  check_single_channel(x);
  x.check_same(r);
  auto spec = fft::forward_real(x.plane(0), x.height(), x.width());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double mag = std::abs(spec[i]);
    spec[i] = mag > 0.0 ? spec[i] * (r[i] / mag) : fft::Complex{};
  }
  fft::transform(spec, x.height(), x.width(), fft::Direction::backward);
  Array out(x.shape());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = spec[i].real();
  return out;
}

}  // namespace latino
