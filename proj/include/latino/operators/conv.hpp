#pragma once

#include <algorithm>
#include <complex>

#include "latino/fft.hpp"
#include "latino/operators/kernels.hpp"
#include "latino/tensor.hpp"

namespace latino {

// Circular (periodic) convolution on (C,H,W) images, applied per channel.
//
// A kernel may be at most one sample larger than the image in each axis: an
// (H+1)-tap kernel wraps its first and last rows onto the same circular
// offset, which is how a full-period kernel with split Nyquist taps is stored.

inline void check_kernel_fits(const ConvKernel& k, std::size_t rows, std::size_t cols) {
  if (k.rows() > rows + 1 || k.cols() > cols + 1)
    throw ShapeError("kernel " + shape_string(k.taps().shape()) +
                     " larger than image " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

// DFT of the kernel embedded on a rows x cols periodic grid, centre tap at
// offset (0,0).
inline fft::Spectrum transfer_function(const ConvKernel& k, std::size_t rows,
                                       std::size_t cols) {
  check_kernel_fits(k, rows, cols);
  std::vector<double> grid(rows * cols, 0.0);
  const long ci = static_cast<long>(k.rows() / 2), cj = static_cast<long>(k.cols() / 2);
  const long R = static_cast<long>(rows), C = static_cast<long>(cols);
  for (std::size_t a = 0; a < k.rows(); ++a)
    for (std::size_t b = 0; b < k.cols(); ++b) {
      const long i = ((static_cast<long>(a) - ci) % R + R) % R;
      const long j = ((static_cast<long>(b) - cj) % C + C) % C;
      grid[static_cast<std::size_t>(i * C + j)] += k(a, b);
    }
  return fft::forward_real(grid, rows, cols);
}

namespace detail {

template <class F>
Array filter_planes(const Array& x, F&& per_bin) {
  Array out(x.shape());
  const std::size_t H = x.height(), W = x.width();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto spec = fft::forward_real(x.plane(c), H, W);
    per_bin(spec);
    auto plane = fft::inverse_real(std::move(spec), H, W);
    std::copy(plane.begin(), plane.end(), out.plane(c).begin());
  }
  return out;
}

}  // namespace detail

inline Array conv_apply(const Array& x, const ConvKernel& k) {
  const auto h = transfer_function(k, x.height(), x.width());
  return detail::filter_planes(x, [&](fft::Spectrum& s) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= h[i];
  });
}

inline Array conv_adjoint(const Array& y, const ConvKernel& k) {
  const auto h = transfer_function(k, y.height(), y.width());
  return detail::filter_planes(y, [&](fft::Spectrum& s) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= std::conj(h[i]);
  });
}

// Spatial-domain reference: y[i,j] = sum_ab k[a,b] x[i-a+ci, j-b+cj] (mod H,W).
inline Array conv_apply_direct(const Array& x, const ConvKernel& k) {
  check_kernel_fits(k, x.height(), x.width());
  const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
  const long ci = static_cast<long>(k.rows() / 2), cj = static_cast<long>(k.cols() / 2);
  Array out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (long i = 0; i < H; ++i)
      for (long j = 0; j < W; ++j) {
        double acc = 0.0;
        for (long a = 0; a < static_cast<long>(k.rows()); ++a)
          for (long b = 0; b < static_cast<long>(k.cols()); ++b) {
            const long si = ((i - a + ci) % H + H) % H;
            const long sj = ((j - b + cj) % W + W) % W;
            acc += k(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) *
                   x(c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
          }
        out(c, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
      }
  return out;
}

// Default floor on |h-hat| for the regularized inverse.
inline constexpr double kConvPinvFloor = 1e-3;

// Spectral inverse conj(h) y / max(|h|^2, eps^2): exact wherever |h| >= eps.
inline Array conv_pseudoinverse(const Array& y, const ConvKernel& k,
                                double eps = kConvPinvFloor) {
  const auto h = transfer_function(k, y.height(), y.width());
  return detail::filter_planes(y, [&](fft::Spectrum& s) {
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] *= std::conj(h[i]) / std::max(std::norm(h[i]), eps * eps);
  });
}

}  // namespace latino
