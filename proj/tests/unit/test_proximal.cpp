#include <gtest/gtest.h>

#include "latino/proximal.hpp"
#include "latino/rng.hpp"
#include "support/oracles.hpp"

using namespace latino;

namespace {

ProxRequest make_request(OpPtr op, Rng& rng, const Shape& shape, double delta, double sigma) {
  ProxRequest r;
  r.u = rng.uniform_like(shape);
  r.y = op->apply(rng.uniform_like(shape)) + rng.gaussian_like(op->range_shape(shape)) * sigma;
  r.op = std::move(op);
  r.delta = delta;
  r.sigma_n = sigma;
  return r;
}

// Dense solve of (delta A^T A + s^2 I) x = delta A^T y + s^2 u.
Array dense_prox(const ProxRequest& r) {
  const auto A = oracle::dense([&](const Array& v) { return r.op->apply(v); }, r.u.shape());
  const double s2 = r.sigma_n * r.sigma_n;
  const oracle::Mat lhs =
      r.delta * A.transpose() * A + s2 * oracle::Mat::Identity(A.cols(), A.cols());
  const oracle::Vec rhs = r.delta * A.transpose() * oracle::to_vec(r.y) + s2 * oracle::to_vec(r.u);
  return oracle::from_vec(lhs.ldlt().solve(rhs), r.u.shape());
}

}  // namespace

TEST(ProxFreq, DeltaZeroReturnsU) {
  Rng rng(1);
  auto r = make_request(make_conv_op(make_gaussian_kernel(3, 1.0)), rng, {1, 8, 8}, 0.0, 0.1);
  EXPECT_TRUE(prox_freq(r) == r.u);
}

TEST(ProxFreq, IdentityAverages) {
  Rng rng(2);
  auto r = make_request(make_identity_op(), rng, {2, 8, 8}, 1.0, 1.0);
  const auto x = prox_freq(r);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], 0.5 * (r.y[i] + r.u[i]), 1e-14);
}

TEST(ProxFreq, MatchesCg) {
  Rng rng(3);
  for (std::size_t n : {16u, 32u}) {
    auto r = make_request(make_conv_op(make_gaussian_kernel(7, 1.5)), rng, {1, n, n}, 0.3, 0.05);
    const auto a = prox_freq(r);
    const auto b = prox_cg(r, {1e-12, 2000});
    EXPECT_TRUE(b.converged);
    EXPECT_LT(oracle::rel_err(a, b.x), 1e-6);
    EXPECT_LT(normal_equations_residual(r, a), 1e-10);
  }
}

TEST(ProxFreq, WrongHintRejected) {
  Rng rng(4);
  auto r = make_request(make_mask_op(Array({8, 8}, 1.0)), rng, {1, 8, 8}, 1.0, 0.1);
  EXPECT_THROW(prox_freq(r), InvalidArgument);
}

TEST(ProxDiag, AllZeroMaskReturnsU) {
  Rng rng(5);
  auto r = make_request(make_mask_op(Array({8, 8}, 0.0)), rng, {1, 8, 8}, 3.0, 0.1);
  EXPECT_TRUE(prox_diag(r) == r.u);
}

TEST(ProxDiag, HugeDeltaHardConsistency) {
  Rng rng(6);
  const Array m = box_mask(8, 8, 1, 1, 4, 4);
  auto r = make_request(make_mask_op(m), rng, {1, 8, 8}, 1e12, 0.1);
  const auto x = prox_diag(r);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == 1.0)
      EXPECT_NEAR(x[i], r.y[i], 1e-6);
    else
      EXPECT_EQ(x[i], r.u[i]);
  }
}

TEST(ProxDiag, MatchesCg) {
  Rng rng(7);
  Array m({8, 8});
  for (double& v : m.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  auto r = make_request(make_mask_op(m), rng, {1, 8, 8}, 0.7, 0.2);
  const auto cg = prox_cg(r, {1e-14, 500});
  EXPECT_LT(max_abs_diff(prox_diag(r), cg.x), 1e-8);
}

TEST(ProxDiag, WrongKindRejected) {
  Rng rng(8);
  auto r = make_request(make_identity_op(), rng, {1, 8, 8}, 1.0, 0.1);
  EXPECT_THROW(prox_diag(r), InvalidArgument);
}

TEST(ProxCg, IdentityClosedForm) {
  Rng rng(9);
  auto r = make_request(make_identity_op(), rng, {1, 8, 8}, 0.4, 0.3);
  const auto x = prox_cg(r).x;
  const double s2 = 0.09;
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(x[i], (0.4 * r.y[i] + s2 * r.u[i]) / (0.4 + s2), 1e-9);
}

TEST(ProxCg, MatchesDenseSolve) {
  Rng rng(10);
  const auto op = make_compose_op({make_conv_op(make_gaussian_kernel(3, 1.0)),
                                   make_downsample_op(2, DownsampleMode::bicubic)});
  auto r = make_request(op, rng, {1, 8, 8}, 2.0, 0.05);
  const auto res = prox_cg(r);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(oracle::rel_err(res.x, dense_prox(r)), 1e-6);
  EXPECT_LE(res.residual, 1e-8);
}

TEST(ProxCg, ObjectiveNotAboveAnchors) {
  Rng rng(11);
  const auto op = make_downsample_op(2, DownsampleMode::avgpool);
  auto r = make_request(op, rng, {1, 16, 16}, 5.0, 0.1);
  const auto res = prox_cg(r);
  EXPECT_LE(res.objective, prox_objective(r, r.u));
  EXPECT_LE(res.objective, prox_objective(r, op->pseudoinverse(r.y)));
}

TEST(ProxCg, NonConvergenceFlagged) {
  Rng rng(12);
  auto r = make_request(make_downsample_op(2, DownsampleMode::bicubic), rng, {1, 16, 16}, 1e4,
                        0.01);
  const auto res = prox_cg(r, {1e-14, 2});
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 2);
  EXPECT_GT(res.residual, 1e-14);
}

TEST(ProxCg, NonlinearRejected) {
  Rng rng(13);
  auto r = make_request(make_phase_retrieval_op(), rng, {1, 8, 8}, 1.0, 0.1);
  EXPECT_THROW(prox_cg(r), InvalidArgument);
}

TEST(ProxNonlinear, DeltaZeroStaysAtU) {
  Rng rng(14);
  auto r = make_request(make_phase_retrieval_op(), rng, {1, 8, 8}, 0.0, 0.1);
  const auto res = prox_nonlinear(r);
  EXPECT_LT(max_abs_diff(res.x, r.u), 1e-12);
  EXPECT_NEAR(res.objective, 0.0, 1e-20);
}

TEST(ProxNonlinear, LinearOpAgreesWithCg) {
  Rng rng(15);
  auto r = make_request(make_conv_op(make_gaussian_kernel(3, 0.8)), rng, {1, 16, 16}, 1e-4,
                        0.01);
  const auto adam = prox_nonlinear(r);
  const auto cg = prox_cg(r);
  EXPECT_EQ(adam.iterations, 300);
  EXPECT_LT(oracle::rel_err(adam.x, cg.x), 2e-3);
}

TEST(ProxNonlinear, PhaseRetrievalDescends) {
  Rng rng(16);
  auto r = make_request(make_phase_retrieval_op(), rng, {1, 8, 8}, 1e-3, 0.5);
  const auto res = prox_nonlinear(r);
  EXPECT_LE(res.objective, prox_objective(r, r.u));
}

TEST(ProxNonlinear, NanAborts) {
  Rng rng(17);
  auto r = make_request(make_identity_op(), rng, {1, 4, 4}, 1.0, 0.1);
  AdamOptions opts;
  opts.lr = 1e308;
  opts.eps = 0.0;
  EXPECT_THROW(prox_nonlinear(r, opts), Error);
}

TEST(Prox, InvalidRequestsRejected) {
  Rng rng(18);
  auto r = make_request(make_identity_op(), rng, {1, 4, 4}, 1.0, 0.1);
  r.delta = -1.0;
  EXPECT_THROW(prox(r), InvalidArgument);
  r.delta = 1.0;
  r.sigma_n = 0.0;
  EXPECT_THROW(prox(r), InvalidArgument);
  r.sigma_n = 0.1;
  r.y = Array({1, 3, 3});
  EXPECT_THROW(prox(r), ShapeError);
}

TEST(Prox, NormalEquationsOnEveryLinearPath) {
  Rng rng(19);
  Array m({16, 16});
  for (double& v : m.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const std::vector<OpPtr> ops{make_conv_op(make_motion_kernel(2, 9, 0.5)), make_mask_op(m),
                               make_downsample_op(4, DownsampleMode::shannon)};
  for (const auto& op : ops) {
    auto r = make_request(op, rng, {1, 16, 16}, 0.5, 0.05);
    EXPECT_LE(normal_equations_residual(r, prox(r).x), 1e-5) << to_string(op->kind());
  }
}

TEST(Prox, DataMisfitNonIncreasingInDelta) {
  Rng rng(20);
  auto r = make_request(make_conv_op(make_gaussian_kernel(5, 1.0)), rng, {1, 16, 16}, 0.0, 0.05);
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4}) {
    r.delta = d;
    const double misfit = distance(r.op->apply(prox(r).x), r.y);
    EXPECT_LE(misfit, prev + 1e-12);
    prev = misfit;
  }
}
