#pragma once

// Closed-form Gaussian references, computed in pixel space with dense
// matrices: prior moments, posterior moments, log marginal likelihood, and
// exact moment propagation through a LATINO chain on a linear problem.

#include <algorithm>
#include <numbers>
#include <tuple>

#include "latino/sae/analytic_prior.hpp"
#include "support/oracles.hpp"

namespace oracle {

// DCT-II rows (d x n) for a (C,H,W) image, coarse-first ordering.
inline Mat dct_rows(std::size_t C, std::size_t H, std::size_t W, std::size_t d) {
  struct K {
    std::size_t c, ky, kx;
  };
  std::vector<K> ks;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < H; ++ky)
      for (std::size_t kx = 0; kx < W; ++kx) ks.push_back({c, ky, kx});
  std::stable_sort(ks.begin(), ks.end(), [](const K& a, const K& b) {
    return std::tuple(a.ky + a.kx, a.ky, a.c) < std::tuple(b.ky + b.kx, b.ky, b.c);
  });
  auto basis = [](std::size_t k, std::size_t i, std::size_t n) {
    const double a = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return a * std::cos(std::numbers::pi * (i + 0.5) * k / n);
  };
  Mat Q = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(C * H * W));
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        Q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>((ks[r].c * H + i) * W + j)) =
            basis(ks[r].ky, i, H) * basis(ks[r].kx, j, W);
  return Q;
}

struct Gaussian {
  Vec mean;
  Mat cov;
};

struct PriorMats {
  Mat Q;  // d x n
  Vec s;  // d
  Mat W;  // d x dc
  Vec b;  // n
};

inline PriorMats prior_mats(const latino::AnalyticGaussianPrior& p) {
  const auto& sh = p.image_shape();
  PriorMats m;
  m.Q = dct_rows(sh[0], sh[1], sh[2], p.latent_dim());
  m.s = to_vec(p.latent_vars());
  m.W = Mat(m.Q.rows(), static_cast<Eigen::Index>(p.cond_dim()));
  for (Eigen::Index i = 0; i < m.W.rows(); ++i)
    for (Eigen::Index j = 0; j < m.W.cols(); ++j)
      m.W(i, j) = p.cond_map()(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  m.b = to_vec(p.offset());
  return m;
}

// x ~ N(b + Q^T W c, Q^T S Q).
inline Gaussian prior_x(const PriorMats& m, const Vec& c) {
  return {m.b + m.Q.transpose() * (m.W * c), m.Q.transpose() * m.s.asDiagonal() * m.Q};
}

// Posterior of x given y = A x + N(0, s2 I), gain form (valid for singular
// prior covariances).
inline Gaussian posterior(const Gaussian& pr, const Mat& A, const Vec& y, double s2) {
  const Mat S = A * pr.cov * A.transpose() + s2 * Mat::Identity(A.rows(), A.rows());
  const Mat K = pr.cov * A.transpose() * S.inverse();
  return {pr.mean + K * (y - A * pr.mean), pr.cov - K * A * pr.cov};
}

inline double log_marginal(const Gaussian& pr, const Mat& A, const Vec& y, double s2) {
  const Mat S = A * pr.cov * A.transpose() + s2 * Mat::Identity(A.rows(), A.rows());
  const Eigen::LLT<Mat> llt(S);
  const Vec r = y - A * pr.mean;
  const double quad = r.dot(llt.solve(r));
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
}

// Exact law of the LATINO iterate after the given (t_k, delta_k) steps on a
// linear problem, started at the deterministic point x0.
inline Gaussian chain_moments(const PriorMats& m, const Vec& c, const Mat& A, const Vec& y,
                              double s2, const Vec& x0, const std::vector<int>& ts,
                              const std::vector<double>& deltas,
                              const latino::NoiseSchedule& sch) {
  const Eigen::Index n = A.cols();
  const Vec w = m.W * c;
  Vec mean = x0;
  Mat cov = Mat::Zero(n, n);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double ab = sch.alpha_bar(ts[k]);
    const Vec r = (m.s.array().sqrt() / (ab * m.s.array() + 1.0 - ab).sqrt()).matrix();
    const Vec rho = r * std::sqrt(ab);
    const Vec nv = (r.array().square() * (1.0 - ab)).matrix();
    // u = b + Q^T (w + rho (Q (x - b) - sqrt(abar) ... )): affine in x plus noise.
    const Mat L = m.Q.transpose() * rho.asDiagonal() * m.Q;
    const Vec mu_u = m.b + m.Q.transpose() * (w + rho.cwiseProduct(m.Q * (mean - m.b) - w));
    const Mat cov_u = L * cov * L.transpose() + m.Q.transpose() * nv.asDiagonal() * m.Q;
    const double d = deltas[k];
    const Mat M = (d * A.transpose() * A + s2 * Mat::Identity(n, n)).inverse();
    mean = M * (d * A.transpose() * y + s2 * mu_u);
    cov = s2 * s2 * M * cov_u * M.transpose();
  }
  return {mean, cov};
}

}  // namespace oracle
