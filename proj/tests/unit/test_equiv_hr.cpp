#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "latino/equiv_hr.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/rng.hpp"
#include "support/oracles.hpp"

using namespace latino;

namespace {

using cplx = std::complex<double>;

std::vector<double> naive_idft_real(const std::vector<cplx>& X, std::size_t H, std::size_t W) {
  std::vector<double> out(H * W);
  for (std::size_t m = 0; m < H; ++m)
    for (std::size_t n = 0; n < W; ++n) {
      cplx acc;
      for (std::size_t k = 0; k < H; ++k)
        for (std::size_t l = 0; l < W; ++l) {
          const double ph = 2.0 * std::numbers::pi *
                            (static_cast<double>(k * m) / static_cast<double>(H) +
                             static_cast<double>(l * n) / static_cast<double>(W));
          acc += X[k * W + l] * cplx(std::cos(ph), std::sin(ph));
        }
      out[m * W + n] = acc.real() / static_cast<double>(H * W);
    }
  return out;
}

long sfreq(std::size_t k, std::size_t n) {
  const long K = static_cast<long>(k), N = static_cast<long>(n);
  return K <= N / 2 ? K : K - N;
}

// Ideal low-pass then decimation, folded directly in the DFT domain: LR bin k
// collects the in-band HR bins congruent to k, edge bins with weight 1/2.
Array oracle_shannon_down(const Array& x, std::size_t s) {
  const std::size_t N = x.height(), M = x.width(), n = N / s, m = M / s;
  auto w = [](long f, std::size_t low) {
    const long a = 2 * std::abs(f), L = static_cast<long>(low);
    return a < L ? 1.0 : (a == L ? 0.5 : 0.0);
  };
  Array out({x.channels(), n, m});
  for (std::size_t c = 0; c < x.channels(); ++c) {
    std::vector<double> plane(x.plane(c).begin(), x.plane(c).end());
    Array p({N, M});
    std::copy(plane.begin(), plane.end(), p.values().begin());
    const auto X = oracle::naive_dft(p, N, M);
    std::vector<cplx> Y(n * m);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < M; ++j) {
        const long fi = sfreq(i, N), fj = sfreq(j, M);
        const double wt = w(fi, n) * w(fj, m);
        if (wt == 0.0) continue;
        const std::size_t li = static_cast<std::size_t>((fi % static_cast<long>(n) + static_cast<long>(n)) % static_cast<long>(n));
        const std::size_t lj = static_cast<std::size_t>((fj % static_cast<long>(m) + static_cast<long>(m)) % static_cast<long>(m));
        Y[li * m + lj] += wt * X[i * M + j] / static_cast<double>(s * s);
      }
    const auto y = naive_idft_real(Y, n, m);
    std::copy(y.begin(), y.end(), out.plane(c).begin());
  }
  return out;
}

ConvKernel random_kernel(Rng& rng, std::size_t size) {
  Array t({size, size});
  for (double& v : t.values()) v = rng.uniform();
  return normalized(std::move(t));
}

}  // namespace

TEST(EquivHr, OracleShannonMatchesLibrary) {
  Rng rng(1);
  const Array x = rng.uniform_like({1, 16, 16});
  EXPECT_LT(max_abs_diff(alias_free_downsample(x, {2, SubsampleKind::shannon}),
                         oracle_shannon_down(x, 2)),
            1e-12);
  const Array x3 = rng.uniform_like({1, 12, 12});
  EXPECT_LT(max_abs_diff(downsample_apply(x3, 3, DownsampleMode::shannon),
                         oracle_shannon_down(x3, 3)),
            1e-12);
}

TEST(EquivHr, DiracLiftIsTransparent) {
  Rng rng(2);
  const Array x = rng.uniform_like({1, 32, 32});
  const auto H = lift_kernel(ConvKernel::identity(), 2, LiftMethod::shannon_zero_pad, 16, 16);
  const SubsampleOp sub{2, SubsampleKind::shannon};
  EXPECT_LT(max_abs_diff(alias_free_downsample(conv_apply(x, H), sub),
                         alias_free_downsample(x, sub)),
            1e-6);
}

TEST(EquivHr, FactorOneReturnsKernel) {
  Rng rng(3);
  const auto h = random_kernel(rng, 5);
  for (auto m : {LiftMethod::shannon_zero_pad, LiftMethod::bicubic_upsample}) {
    const auto H = lift_kernel(h, 1, m, 8, 8);
    EXPECT_EQ(H.taps(), h.taps());
  }
}

// Both sides computed with spatial-domain convolution and DFT-folding
// subsampling; only the lifted kernel comes from the library.
TEST(EquivHr, ShannonLiftExactAgainstOracle) {
  Rng rng(4);
  for (std::size_t s : {2u, 3u}) {
    const std::size_t n = 6;
    const Array x = rng.uniform_like({1, n * s, n * s});
    const auto h = random_kernel(rng, 3);
    const auto H = lift_kernel(h, s, LiftMethod::shannon_zero_pad, n, n);
    const Array lhs = conv_apply_direct(oracle_shannon_down(x, s), h);
    const Array rhs = oracle_shannon_down(conv_apply_direct(x, H), s);
    EXPECT_LT(max_abs_diff(lhs, rhs) / max_abs(rhs), 1e-10) << "s=" << s;
  }
}

TEST(EquivHr, ShannonLiftRandomPairs) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Array x = rng.uniform_like({1, 64, 64});
    const auto h = make_gaussian_kernel(9, 1.0 + rng.uniform());
    const auto H = lift_kernel(h, 2, LiftMethod::shannon_zero_pad, 32, 32);
    EXPECT_LT(verify_equivalence(x, h, H, {2, SubsampleKind::shannon}), 1e-10);
    EXPECT_LT(verify_equivalence(x, h, H, {2, SubsampleKind::smooth_spectral}), 1e-10);
  }
}

TEST(EquivHr, ShannonLiftOddGrid) {
  Rng rng(6);
  const Array x = rng.uniform_like({1, 15, 15});
  const auto h = random_kernel(rng, 3);
  const auto H = lift_kernel(h, 3, LiftMethod::shannon_zero_pad, 5, 5);
  EXPECT_EQ(H.rows(), 15u);
  EXPECT_LT(verify_equivalence(x, h, H, {3, SubsampleKind::shannon}), 1e-10);
}

TEST(EquivHr, ShannonLiftLowBandBinExact) {
  Rng rng(7);
  const auto h = random_kernel(rng, 5);
  const std::size_t n = 8, s = 2, N = n * s;
  const auto H = lift_kernel(h, s, LiftMethod::shannon_zero_pad, n, n);
  EXPECT_EQ(H.rows(), N + 1);
  const auto hh = transfer_function(h, n, n);
  const auto HH = transfer_function(H, N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const long fi = sfreq(i, N), fj = sfreq(j, N);
      const bool in_band = 2 * std::abs(fi) <= static_cast<long>(n) &&
                           2 * std::abs(fj) <= static_cast<long>(n);
      const std::size_t li = static_cast<std::size_t>((fi + static_cast<long>(n)) % static_cast<long>(n));
      const std::size_t lj = static_cast<std::size_t>((fj + static_cast<long>(n)) % static_cast<long>(n));
      const cplx want = in_band ? hh[li * n + lj] : cplx{};
      EXPECT_LT(std::abs(HH[i * N + j] - want), 1e-12) << i << "," << j;
    }
}

TEST(EquivHr, ShannonLiftNeedsGrid) {
  EXPECT_THROW(lift_kernel(ConvKernel::identity(), 2, LiftMethod::shannon_zero_pad),
               InvalidArgument);
}

TEST(EquivHr, BicubicLiftShapeAndSum) {
  const auto h = make_gaussian_kernel(7, 1.5);
  const auto H = lift_kernel(h, 2, LiftMethod::bicubic_upsample);
  EXPECT_EQ(H.rows(), 2u * (2 * 3 + 2 * 2 - 1) + 1);
  EXPECT_NEAR(H.sum(), 1.0, 1e-12);
  // Symmetric input stays symmetric.
  EXPECT_LT(max_abs_diff(H.taps(), H.flipped().taps()), 1e-14);
}

// Dirac at the LR level upsamples to the separable Keys filter itself.
TEST(EquivHr, BicubicLiftOfDiracIsKeysFilter) {
  const auto H = lift_kernel(ConvKernel::identity(), 2, LiftMethod::bicubic_upsample);
  ASSERT_EQ(H.rows(), 7u);
  double sum = 0.0;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) sum += keys_cubic(a / 2.0) * keys_cubic(b / 2.0);
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      EXPECT_NEAR(H(static_cast<std::size_t>(a + 3), static_cast<std::size_t>(b + 3)),
                  keys_cubic(a / 2.0) * keys_cubic(b / 2.0) / sum, 1e-14);
}

TEST(EquivHr, SpectralSupportInsideBand) {
  EXPECT_EQ(spectral_leakage({2, SubsampleKind::shannon}, 32, 32), 0.0);
  EXPECT_EQ(spectral_leakage({4, SubsampleKind::smooth_spectral}, 32, 32), 0.0);
  EXPECT_GT(spectral_leakage({2, SubsampleKind::bicubic}, 32, 32), 0.0);
}

TEST(EquivHr, SmoothWindowRollsOffToZero) {
  const auto r = subsample_filter_response({2, SubsampleKind::smooth_spectral, 0.5}, 16, 16);
  EXPECT_DOUBLE_EQ(r[0].real(), 1.0);
  // Band edge |F| = 4 on the 16-grid: weight 0.
  EXPECT_DOUBLE_EQ(r[4].real(), 0.0);
  // Halfway through the roll-off: cos^2 shape gives 1/2.
  EXPECT_NEAR(r[3].real(), 0.5, 1e-15);
}

TEST(EquivHr, ComposeAvgpoolExactOnDyadicImages) {
  Rng rng(8);
  Array x({1, 64, 64});
  for (double& v : x.values()) v = std::floor(rng.uniform() * 256.0) / 256.0;
  EXPECT_EQ(compose_check(x, 8, 2, DownsampleMode::avgpool), 0.0);
  EXPECT_EQ(compose_check(x, 2, 4, DownsampleMode::avgpool), 0.0);
}

TEST(EquivHr, ComposeShannonNearExact) {
  Rng rng(9);
  const Array x = rng.uniform_like({1, 32, 32});
  EXPECT_LT(compose_check(x, 2, 2, DownsampleMode::shannon), 1e-12);
}

TEST(EquivHr, BadFactorsRejected) {
  Rng rng(10);
  const Array x = rng.uniform_like({1, 12, 12});
  EXPECT_THROW(compose_check(x, 5, 1, DownsampleMode::avgpool), ShapeError);
  EXPECT_THROW(compose_check(x, 0, 2, DownsampleMode::avgpool), InvalidArgument);
  EXPECT_THROW(alias_free_downsample(x, {5, SubsampleKind::smooth_spectral}), ShapeError);
  EXPECT_THROW(parse_subsample_kind("nearest"), InvalidArgument);
}

TEST(EquivHr, BicubicLiftApproximate) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const double sigma = 1.5 + 1.5 * rng.uniform();
    const auto h = make_gaussian_kernel(2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1, sigma);
    const auto H = lift_kernel(h, 2, LiftMethod::bicubic_upsample);
    const Array x = rng.uniform_like({1, 64, 64});
    EXPECT_LT(verify_equivalence(x, h, H, {2, SubsampleKind::bicubic}), 1e-2) << sigma;
  }
}

TEST(EquivHr, ComposeBicubicApproximate) {
  Rng rng(91);
  const Array x = rng.uniform_like({1, 128, 128});
  EXPECT_LE(compose_check(x, 8, 2, DownsampleMode::bicubic), 1e-2);
}
