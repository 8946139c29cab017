#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "latino/error.hpp"
#include "latino/fft.hpp"
#include "latino/operators/conv.hpp"
#include "latino/operators/downsample.hpp"
#include "latino/tensor.hpp"

namespace latino {

// Alias-free subsampling S_s(X) = decimate_s(h_s * X) on periodic images and
// the lifting of a low-resolution kernel h to a high-resolution H with
// S_s(X) * h == S_s(X * H).

enum class SubsampleKind { shannon, smooth_spectral, bicubic };
enum class LiftMethod { shannon_zero_pad, bicubic_upsample };

inline std::string to_string(SubsampleKind k) {
  switch (k) {
    case SubsampleKind::shannon: return "shannon";
    case SubsampleKind::smooth_spectral: return "smooth_spectral";
    case SubsampleKind::bicubic: return "bicubic";
  }
  return "?";
}

inline SubsampleKind parse_subsample_kind(const std::string& s) {
  if (s == "shannon") return SubsampleKind::shannon;
  if (s == "smooth_spectral") return SubsampleKind::smooth_spectral;
  if (s == "bicubic") return SubsampleKind::bicubic;
  throw InvalidArgument("unknown subsample kind '" + s + "'");
}

struct SubsampleOp {
  std::size_t factor = 2;
  SubsampleKind kind = SubsampleKind::shannon;
  // smooth_spectral: fraction of the half band used by the raised-cosine
  // roll-off that reaches 0 at the band edge.
  double rolloff = 0.25;
};

namespace detail {

// Raised-cosine window on HR bin k for an LR grid of n_low samples.
inline double smooth_weight(std::size_t k, std::size_t n_high, std::size_t n_low, double rolloff) {
  const double f = std::abs(static_cast<double>(fft::signed_frequency(k, n_high)));
  const double edge = 0.5 * static_cast<double>(n_low), knee = (1.0 - rolloff) * edge;
  if (f <= knee) return 1.0;
  if (f >= edge) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (f - knee) / (edge - knee)));
}

inline double window_weight(const SubsampleOp& op, std::size_t k, std::size_t n_high) {
  const std::size_t n_low = n_high / op.factor;
  return op.kind == SubsampleKind::smooth_spectral ? smooth_weight(k, n_high, n_low, op.rolloff)
                                                   : shannon_weight(k, n_high, n_low);
}

}  // namespace detail

// Frequency response of the anti-aliasing filter on an H x W grid.
inline fft::Spectrum subsample_filter_response(const SubsampleOp& op, std::size_t H,
                                               std::size_t W) {
  if (op.factor == 0 || H % op.factor || W % op.factor)
    throw ShapeError("grid not divisible by the subsampling factor");
  fft::Spectrum r(H * W);
  if (op.kind == SubsampleKind::bicubic) {
    const auto taps = bicubic_filter_taps(op.factor);
    const std::size_t n = taps.size();
    Array k({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) = taps[i] * taps[j];
    return transfer_function(ConvKernel(std::move(k)), H, W);
  }
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      r[i * W + j] = detail::window_weight(op, i, H) * detail::window_weight(op, j, W);
  return r;
}

// Largest |response| outside the band [-pi/s, pi/s]^2.
inline double spectral_leakage(const SubsampleOp& op, std::size_t H, std::size_t W) {
  const auto r = subsample_filter_response(op, H, W);
  const long nh = static_cast<long>(H / op.factor), nw = static_cast<long>(W / op.factor);
  double worst = 0.0;
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      const long fi = 2 * std::labs(fft::signed_frequency(i, H));
      const long fj = 2 * std::labs(fft::signed_frequency(j, W));
      if (fi > nh || fj > nw) worst = std::max(worst, std::abs(r[i * W + j]));
    }
  return worst;
}

inline Array alias_free_downsample(const Array& X, const SubsampleOp& op) {
  detail::check_divisible(X, op.factor);
  if (op.factor == 1) return X;
  switch (op.kind) {
    case SubsampleKind::shannon: return downsample_apply(X, op.factor, DownsampleMode::shannon);
    case SubsampleKind::bicubic: return downsample_apply(X, op.factor, DownsampleMode::bicubic);
    case SubsampleKind::smooth_spectral: {
      const std::size_t H = X.height(), W = X.width();
      const auto r = subsample_filter_response(op, H, W);
      return detail::decimate(detail::filter_planes(X, [&](fft::Spectrum& s) {
                                for (std::size_t i = 0; i < s.size(); ++i) s[i] *= r[i];
                              }),
                              op.factor);
    }
  }
  throw InvalidArgument("unknown subsample kind");
}

namespace detail {

// Periodic rows x cols kernel (centre at index 0) as an odd ConvKernel. An even
// extent becomes extent+1 taps with the two aliased edge taps split in half.
inline ConvKernel periodic_to_kernel(const std::vector<double>& g, std::size_t rows,
                                     std::size_t cols) {
  const std::size_t kr = rows % 2 ? rows : rows + 1, kc = cols % 2 ? cols : cols + 1;
  const long hr = static_cast<long>(kr / 2), hc = static_cast<long>(kc / 2);
  Array taps({kr, kc});
  for (long a = -hr; a <= hr; ++a) {
    const double wa = (rows % 2 == 0 && std::labs(a) == hr) ? 0.5 : 1.0;
    for (long b = -hc; b <= hc; ++b) {
      const double wb = (cols % 2 == 0 && std::labs(b) == hc) ? 0.5 : 1.0;
      const std::size_t i = wrap(a, rows), j = wrap(b, cols);
      taps(static_cast<std::size_t>(a + hr), static_cast<std::size_t>(b + hc)) =
          wa * wb * g[i * cols + j];
    }
  }
  return ConvKernel(std::move(taps));
}

}  // namespace detail

// Lifts h (acting on an lr_rows x lr_cols grid) to H on the s-times finer grid.
//
// shannon_zero_pad: H-hat(F) = h-hat(F mod n) on the closed band |F| <= n/2
// and 0 elsewhere, so the equivalence is exact for Shannon subsampling. H is
// a full-period kernel of the HR grid.
//
// bicubic_upsample: H = K h K^T with K[m][j] = keys((m - s j)/s), rescaled to
// the tap sum of h.
inline ConvKernel lift_kernel(const ConvKernel& h, std::size_t s, LiftMethod method,
                              std::size_t lr_rows = 0, std::size_t lr_cols = 0) {
  if (s == 0) throw InvalidArgument("lift factor must be >= 1");
  if (s == 1) return h;
  if (method == LiftMethod::bicubic_upsample) {
    const long cr = static_cast<long>(h.rows() / 2), cc = static_cast<long>(h.cols() / 2);
    const long S = static_cast<long>(s);
    const long Rr = S * cr + 2 * S - 1, Rc = S * cc + 2 * S - 1;
    auto weights = [&](long R, long c) {
      std::vector<double> K(static_cast<std::size_t>((2 * R + 1) * (2 * c + 1)));
      for (long m = -R; m <= R; ++m)
        for (long j = -c; j <= c; ++j)
          K[static_cast<std::size_t>((m + R) * (2 * c + 1) + (j + c))] =
              keys_cubic(static_cast<double>(m - S * j) / static_cast<double>(S));
      return K;
    };
    const auto Ky = weights(Rr, cr), Kx = weights(Rc, cc);
    const std::size_t Hr = static_cast<std::size_t>(2 * Rr + 1), Hc = static_cast<std::size_t>(2 * Rc + 1);
    const std::size_t hr = h.rows(), hc = h.cols();
    Array tmp({hr, Hc});
    for (std::size_t a = 0; a < hr; ++a)
      for (std::size_t m = 0; m < Hc; ++m) {
        double acc = 0.0;
        for (std::size_t b = 0; b < hc; ++b) acc += h(a, b) * Kx[m * hc + b];
        tmp(a, m) = acc;
      }
    Array out({Hr, Hc});
    double sum = 0.0;
    for (std::size_t l = 0; l < Hr; ++l)
      for (std::size_t m = 0; m < Hc; ++m) {
        double acc = 0.0;
        for (std::size_t a = 0; a < hr; ++a) acc += Ky[l * hr + a] * tmp(a, m);
        out(l, m) = acc;
        sum += acc;
      }
    if (sum == 0.0) throw InvalidArgument("bicubic lift produced a zero-sum kernel");
    out *= h.sum() / sum;
    return ConvKernel(std::move(out));
  }

  if (lr_rows == 0 || lr_cols == 0)
    throw InvalidArgument("shannon lift needs the low-resolution grid size");
  const auto hh = transfer_function(h, lr_rows, lr_cols);
  const std::size_t N = lr_rows * s, M = lr_cols * s;
  fft::Spectrum big(N * M);
  for (std::size_t i = 0; i < N; ++i) {
    const long fi = fft::signed_frequency(i, N);
    if (2 * std::labs(fi) > static_cast<long>(lr_rows)) continue;
    const std::size_t li = detail::wrap(fi, lr_rows);
    for (std::size_t j = 0; j < M; ++j) {
      const long fj = fft::signed_frequency(j, M);
      if (2 * std::labs(fj) > static_cast<long>(lr_cols)) continue;
      big[i * M + j] = hh[li * lr_cols + detail::wrap(fj, lr_cols)];
    }
  }
  return detail::periodic_to_kernel(fft::inverse_real(std::move(big), N, M), N, M);
}

// max |S(X) * h - S(X * H)| / max |S(X * H)|.
inline double verify_equivalence(const Array& X, const ConvKernel& h, const ConvKernel& H,
                                 const SubsampleOp& sub) {
  const Array lhs = conv_apply(alias_free_downsample(X, sub), h);
  const Array rhs = alias_free_downsample(conv_apply(X, H), sub);
  const double scale = max_abs(rhs);
  return max_abs_diff(lhs, rhs) / (scale > 0.0 ? scale : 1.0);
}

// max |S_{ab}(X) - S_a(S_b(X))|.
inline double compose_check(const Array& X, std::size_t a, std::size_t b, DownsampleMode mode) {
  if (a == 0 || b == 0) throw InvalidArgument("factors must be >= 1");
  detail::check_divisible(X, a * b);
  return max_abs_diff(downsample_apply(X, a * b, mode),
                      downsample_apply(downsample_apply(X, b, mode), a, mode));
}

}  // namespace latino
