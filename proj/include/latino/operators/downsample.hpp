#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "latino/error.hpp"
#include "latino/fft.hpp"
#include "latino/tensor.hpp"

namespace latino {

enum class DownsampleMode { avgpool, bicubic, shannon };

inline std::string to_string(DownsampleMode m) {
  switch (m) {
    case DownsampleMode::avgpool: return "avgpool";
    case DownsampleMode::bicubic: return "bicubic";
    case DownsampleMode::shannon: return "shannon";
  }
  return "?";
}

inline DownsampleMode parse_downsample_mode(const std::string& s) {
  if (s == "avgpool") return DownsampleMode::avgpool;
  if (s == "bicubic") return DownsampleMode::bicubic;
  if (s == "shannon") return DownsampleMode::shannon;
  throw InvalidArgument("unknown downsample mode '" + s + "'");
}

// Keys cubic convolution kernel.
inline double keys_cubic(double x, double a = -0.5) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Anti-aliasing filter of bicubic decimation by s: taps K(n/s) for
// n in [-(2s-1), 2s-1], normalized to unit sum.
inline std::vector<double> bicubic_filter_taps(std::size_t s) {
  const long r = 2 * static_cast<long>(s) - 1;
  std::vector<double> taps;
  double sum = 0.0;
  for (long n = -r; n <= r; ++n) {
    taps.push_back(keys_cubic(static_cast<double>(n) / static_cast<double>(s)));
    sum += taps.back();
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Spectral weight of the ideal low-pass at HR bin `k` (grid n_high) for an LR
// grid of n_low samples. The band edge of an even LR grid gets weight 1/2.
inline double shannon_weight(std::size_t k, std::size_t n_high, std::size_t n_low) {
  const long f2 = 2 * std::labs(fft::signed_frequency(k, n_high));
  const long n = static_cast<long>(n_low);
  if (f2 < n) return 1.0;
  if (f2 == n) return 0.5;
  return 0.0;
}

namespace detail {

inline void check_divisible(const Array& x, std::size_t s) {
  if (s == 0) throw InvalidArgument("downsampling factor must be >= 1");
  if (x.height() % s != 0 || x.width() % s != 0)
    throw ShapeError("image " + shape_string(x.shape()) +
                     " not divisible by factor " + std::to_string(s));
}

inline std::size_t wrap(long i, std::size_t n) {
  const long N = static_cast<long>(n);
  return static_cast<std::size_t>(((i % N) + N) % N);
}

// out[c,i,j] = sum_{a,b} wy(i,a) wx(j,b) in[c,a,b] for separable weights given
// as callbacks returning the (index, weight) list feeding output sample i.
template <class RowTaps, class ColTaps>
Array separable(const Array& in, std::size_t out_h, std::size_t out_w, RowTaps&& row_taps,
                ColTaps&& col_taps) {
  const std::size_t C = in.channels(), H = in.height();
  Array tmp({C, H, out_w});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < out_w; ++j) {
      const auto taps = col_taps(j);
      for (std::size_t i = 0; i < H; ++i) {
        double acc = 0.0;
        for (const auto& [b, w] : taps) acc += w * in(c, i, b);
        tmp(c, i, j) = acc;
      }
    }
  Array out({C, out_h, out_w});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto taps = row_taps(i);
      for (std::size_t j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (const auto& [a, w] : taps) acc += w * tmp(c, a, j);
        out(c, i, j) = acc;
      }
    }
  return out;
}

using TapList = std::vector<std::pair<std::size_t, double>>;

// Taps of bicubic decimation: LR sample i reads HR samples s*i + n.
inline auto bicubic_down_taps(std::size_t s, std::size_t n_high) {
  const auto f = bicubic_filter_taps(s);
  const long r = 2 * static_cast<long>(s) - 1;
  return [f, r, s, n_high](std::size_t i) {
    TapList taps;
    for (long n = -r; n <= r; ++n)
      taps.emplace_back(wrap(static_cast<long>(s * i) + n, n_high),
                        f[static_cast<std::size_t>(n + r)]);
    return taps;
  };
}

// Bicubic interpolation: LR sample i spreads K(d/s) onto HR sample s*i + d.
inline auto bicubic_up_taps(std::size_t s, std::size_t n_high) {
  const long r = 2 * static_cast<long>(s) - 1;
  return [r, s, n_high](std::size_t i) {
    TapList taps;
    for (long d = -r; d <= r; ++d) {
      const double w = keys_cubic(static_cast<double>(d) / static_cast<double>(s));
      if (w != 0.0) taps.emplace_back(wrap(static_cast<long>(s * i) + d, n_high), w);
    }
    return taps;
  };
}

// Transpose of `separable`: in[c,i,j] is scattered with weights
// row_taps(i) x col_taps(j) into an out_h x out_w image.
template <class RowTaps, class ColTaps>
Array separable_scatter(const Array& in, std::size_t out_h, std::size_t out_w,
                        RowTaps&& row_taps, ColTaps&& col_taps) {
  const std::size_t C = in.channels(), h = in.height(), w = in.width();
  Array tmp({C, out_h, w});
  for (std::size_t i = 0; i < h; ++i) {
    const auto taps = row_taps(i);
    for (std::size_t c = 0; c < C; ++c)
      for (const auto& [m, wt] : taps)
        for (std::size_t j = 0; j < w; ++j) tmp(c, m, j) += wt * in(c, i, j);
  }
  Array out({C, out_h, out_w});
  for (std::size_t j = 0; j < w; ++j) {
    const auto taps = col_taps(j);
    for (std::size_t c = 0; c < C; ++c)
      for (const auto& [n, wt] : taps)
        for (std::size_t m = 0; m < out_h; ++m) out(c, m, n) += wt * tmp(c, m, j);
  }
  return out;
}

inline Array shannon_filter(const Array& x, std::size_t n_low_h, std::size_t n_low_w) {
  const std::size_t H = x.height(), W = x.width();
  Array out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto spec = fft::forward_real(x.plane(c), H, W);
    for (std::size_t i = 0; i < H; ++i) {
      const double wy = shannon_weight(i, H, n_low_h);
      for (std::size_t j = 0; j < W; ++j) spec[i * W + j] *= wy * shannon_weight(j, W, n_low_w);
    }
    auto plane = fft::inverse_real(std::move(spec), H, W);
    std::copy(plane.begin(), plane.end(), out.plane(c).begin());
  }
  return out;
}

inline Array decimate(const Array& x, std::size_t s) {
  Array out({x.channels(), x.height() / s, x.width() / s});
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < out.height(); ++i)
      for (std::size_t j = 0; j < out.width(); ++j) out(c, i, j) = x(c, s * i, s * j);
  return out;
}

inline Array zero_insert(const Array& y, std::size_t s) {
  Array out({y.channels(), y.height() * s, y.width() * s});
  for (std::size_t c = 0; c < y.channels(); ++c)
    for (std::size_t i = 0; i < y.height(); ++i)
      for (std::size_t j = 0; j < y.width(); ++j) out(c, s * i, s * j) = y(c, i, j);
  return out;
}

}  // namespace detail

inline Array downsample_apply(const Array& x, std::size_t s, DownsampleMode mode) {
  detail::check_divisible(x, s);
  if (s == 1) return x;
  const std::size_t h = x.height() / s, w = x.width() / s;
  switch (mode) {
    case DownsampleMode::avgpool: {
      Array out({x.channels(), h, w});
      const double inv = 1.0 / static_cast<double>(s * s);
      for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < s; ++a)
              for (std::size_t b = 0; b < s; ++b) acc += x(c, s * i + a, s * j + b);
            out(c, i, j) = acc * inv;
          }
      return out;
    }
    case DownsampleMode::bicubic:
      return detail::separable(x, h, w, detail::bicubic_down_taps(s, x.height()),
                               detail::bicubic_down_taps(s, x.width()));
    case DownsampleMode::shannon:
      return detail::decimate(detail::shannon_filter(x, h, w), s);
  }
  throw InvalidArgument("unknown downsample mode");
}

inline Array downsample_adjoint(const Array& y, std::size_t s, DownsampleMode mode) {
  if (s == 0) throw InvalidArgument("downsampling factor must be >= 1");
  if (s == 1) return y;
  const std::size_t H = y.height() * s, W = y.width() * s;
  switch (mode) {
    case DownsampleMode::avgpool: {
      Array out({y.channels(), H, W});
      const double inv = 1.0 / static_cast<double>(s * s);
      for (std::size_t c = 0; c < y.channels(); ++c)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) out(c, i, j) = y(c, i / s, j / s) * inv;
      return out;
    }
    case DownsampleMode::bicubic:
      return detail::separable_scatter(y, H, W, detail::bicubic_down_taps(s, H),
                                       detail::bicubic_down_taps(s, W));
    case DownsampleMode::shannon:
      return detail::shannon_filter(detail::zero_insert(y, s), y.height(), y.width());
  }
  throw InvalidArgument("unknown downsample mode");
}

// avgpool: block replication (A A^+ = Id). bicubic: Keys interpolation.
// shannon: spectral zero padding, scaled so that decimation recovers y.
inline Array downsample_pseudoinverse(const Array& y, std::size_t s, DownsampleMode mode) {
  if (s == 0) throw InvalidArgument("downsampling factor must be >= 1");
  if (s == 1) return y;
  const std::size_t h = y.height(), w = y.width(), H = h * s, W = w * s;
  switch (mode) {
    case DownsampleMode::avgpool: {
      Array out({y.channels(), H, W});
      for (std::size_t c = 0; c < y.channels(); ++c)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) out(c, i, j) = y(c, i / s, j / s);
      return out;
    }
    case DownsampleMode::bicubic:
      return detail::separable_scatter(y, H, W, detail::bicubic_up_taps(s, H),
                                       detail::bicubic_up_taps(s, W));
    case DownsampleMode::shannon: {
      Array out({y.channels(), H, W});
      const double gain = static_cast<double>(s * s);
      for (std::size_t c = 0; c < y.channels(); ++c) {
        const auto low = fft::forward_real(y.plane(c), h, w);
        fft::Spectrum high(H * W);
        for (std::size_t i = 0; i < H; ++i) {
          if (shannon_weight(i, H, h) == 0.0) continue;
          const std::size_t li = detail::wrap(fft::signed_frequency(i, H), h);
          for (std::size_t j = 0; j < W; ++j) {
            if (shannon_weight(j, W, w) == 0.0) continue;
            const std::size_t lj = detail::wrap(fft::signed_frequency(j, W), w);
            high[i * W + j] = gain * low[li * w + lj];
          }
        }
        auto plane = fft::inverse_real(std::move(high), H, W);
        std::copy(plane.begin(), plane.end(), out.plane(c).begin());
      }
      return out;
    }
  }
  throw InvalidArgument("unknown downsample mode");
}

}  // namespace latino
