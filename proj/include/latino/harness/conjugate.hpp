#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "latino/error.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/sae/analytic_prior.hpp"

namespace latino {

// Closed-form Gaussian posterior for the analytic prior and a linear operator,
// used by the conjugate-verification mode of the runner.

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline Eigen::VectorXd as_vector(const Array& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

inline Array as_array(const Eigen::VectorXd& v, const Shape& shape) {
  Array a(shape);
  Eigen::Map<Eigen::VectorXd>(a.data(), v.size()) = v;
  return a;
}

// Column j = A e_j.
inline Eigen::MatrixXd operator_matrix(const DegradationOp& op, const Shape& domain) {
  if (!op.is_linear()) throw InvalidArgument("operator matrix needs a linear operator");
  const std::size_t n = shape_size(domain);
  Eigen::MatrixXd A;
  for (std::size_t j = 0; j < n; ++j) {
    Array e(domain);
    e[j] = 1.0;
    const Eigen::VectorXd col = as_vector(op.apply(e));
    if (j == 0) A.resize(col.size(), static_cast<Eigen::Index>(n));
    A.col(static_cast<Eigen::Index>(j)) = col;
  }
  return A;
}

// x = b + Q^T z, z ~ N(W c, diag s)  =>  x ~ N(b + Q^T W c, Q^T diag(s) Q).
inline GaussianMoments prior_moments(const AnalyticGaussianPrior& p, const Array& c) {
  const std::size_t d = p.latent_dim(), n = shape_size(p.image_shape());
  Eigen::MatrixXd Qt(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    Array e({d});
    e[i] = 1.0;
    Qt.col(static_cast<Eigen::Index>(i)) = as_vector(p.basis().synthesize(e));
  }
  const Eigen::VectorXd s = as_vector(p.latent_vars());
  GaussianMoments m;
  m.mean = as_vector(p.decode(p.mean_latent(c)));
  m.cov = Qt * s.asDiagonal() * Qt.transpose();
  return m;
}

// Gain form, valid for singular prior covariances.
inline GaussianMoments gaussian_posterior(const GaussianMoments& pr, const Eigen::MatrixXd& A,
                                          const Eigen::VectorXd& y, double sigma2) {
  const Eigen::MatrixXd SAt = pr.cov * A.transpose();
  Eigen::MatrixXd S = A * SAt;
  S.diagonal().array() += sigma2;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::MatrixXd K = ldlt.solve(SAt.transpose()).transpose();
  GaussianMoments post;
  post.mean = pr.mean + K * (y - A * pr.mean);
  post.cov = pr.cov - K * SAt.transpose();
  return post;
}

// log N(y; A m, A C A^T + sigma2 I).
inline double log_marginal(const GaussianMoments& pr, const Eigen::MatrixXd& A,
                           const Eigen::VectorXd& y, double sigma2) {
  Eigen::MatrixXd S = A * pr.cov * A.transpose();
  S.diagonal().array() += sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw Error("marginal covariance is not positive definite");
  const Eigen::VectorXd r = y - A * pr.mean;
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + logdet +
                 static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace latino
