#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "latino/error.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/tensor.hpp"

namespace latino {

// prox_{delta g_y}(u) for g_y(x) = |y - A x|^2 / (2 sigma_n^2), i.e. the
// minimizer of
//
//   delta |y - A x|^2 / (2 sigma_n^2) + |x - u|^2 / 2.
//
// For linear A this is (delta A^T A + sigma_n^2 I)^{-1} (delta A^T y + sigma_n^2 u).
struct ProxRequest {
  Array u;
  Array y;
  OpPtr op;
  double delta = 0.0;
  double sigma_n = 1.0;

  void validate() const {
    if (!op) throw InvalidArgument("prox request without operator");
    if (!(delta >= 0.0) || !std::isfinite(delta))
      throw InvalidArgument("prox delta must be a finite non-negative number");
    if (!(sigma_n > 0.0)) throw InvalidArgument("prox sigma_n must be positive");
    if (op->range_shape(u.shape()) != y.shape())
      throw ShapeError("measurement " + shape_string(y.shape()) +
                       " does not match operator range for " + shape_string(u.shape()));
  }
};

struct ProxResult {
  Array x;
  double objective = 0.0;
  // Relative normal-equation residual (CG) or final gradient norm (Adam).
  double residual = 0.0;
  int iterations = 0;
  bool converged = true;
};

inline double prox_objective(const ProxRequest& req, const Array& x) {
  const double data = squared_norm(req.op->apply(x) - req.y);
  return req.delta * data / (2.0 * req.sigma_n * req.sigma_n) +
         0.5 * squared_norm(x - req.u);
}

// |(delta A^T A + s^2 I) x - (delta A^T y + s^2 u)| / |rhs|.
inline double normal_equations_residual(const ProxRequest& req, const Array& x) {
  const double s2 = req.sigma_n * req.sigma_n;
  Array lhs = req.op->adjoint(req.op->apply(x)) * req.delta;
  lhs.axpy(s2, x);
  Array rhs = req.op->adjoint(req.y) * req.delta;
  rhs.axpy(s2, req.u);
  const double denom = norm(rhs);
  return denom > 0.0 ? distance(lhs, rhs) / denom : norm(lhs);
}

// Exact prox for circular convolution, solved per frequency bin:
// x-hat = (delta conj(h) y-hat + s^2 u-hat) / (delta |h|^2 + s^2).
inline Array prox_freq(const ProxRequest& req) {
  req.validate();
  const auto* conv = dynamic_cast<const ConvOp*>(req.op.get());
  if (req.op->hint() != SolverHint::freq_diagonal || conv == nullptr)
    throw InvalidArgument("prox_freq needs a frequency-diagonal (conv) operator, got " +
                          to_string(req.op->kind()));
  if (req.delta == 0.0) return req.u;
  const std::size_t H = req.u.height(), W = req.u.width();
  const auto h = conv->transfer(H, W);
  const double s2 = req.sigma_n * req.sigma_n, d = req.delta;
  Array out(req.u.shape());
  for (std::size_t c = 0; c < req.u.channels(); ++c) {
    auto uh = fft::forward_real(req.u.plane(c), H, W);
    const auto yh = fft::forward_real(req.y.plane(c), H, W);
    for (std::size_t i = 0; i < uh.size(); ++i)
      uh[i] = (d * std::conj(h[i]) * yh[i] + s2 * uh[i]) / (d * std::norm(h[i]) + s2);
    const auto plane = fft::inverse_real(std::move(uh), H, W);
    std::copy(plane.begin(), plane.end(), out.plane(c).begin());
  }
  return out;
}

// Exact prox for a binary mask: observed pixels (delta y + s^2 u)/(delta + s^2),
// unobserved pixels keep u.
inline Array prox_diag(const ProxRequest& req) {
  req.validate();
  const auto* mask = dynamic_cast<const MaskOp*>(req.op.get());
  if (mask == nullptr)
    throw InvalidArgument("prox_diag needs a mask operator, got " + to_string(req.op->kind()));
  const double s2 = req.sigma_n * req.sigma_n, d = req.delta;
  const Array& m = mask->mask();
  Array out = req.u;
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto x = out.plane(c);
    const auto y = req.y.plane(c);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] != 0.0) x[i] = (d * y[i] + s2 * x[i]) / (d + s2);
  }
  return out;
}

struct CgOptions {
  double tol = 1e-8;
  int max_iter = 500;
};

// Conjugate gradients on (delta A^T A + s^2 I) x = delta A^T y + s^2 u,
// started at u. No preconditioner; a Jacobi or spectral one would slot in
// where `r` is turned into the search direction.
// Non-convergence is reported through `converged`, never silently.
inline ProxResult prox_cg(const ProxRequest& req, CgOptions opts = {}) {
  req.validate();
  if (!req.op->is_linear()) throw InvalidArgument("prox_cg needs a linear operator");
  const double s2 = req.sigma_n * req.sigma_n, d = req.delta;
  auto normal_op = [&](const Array& v) {
    Array out = req.op->adjoint(req.op->apply(v)) * d;
    out.axpy(s2, v);
    return out;
  };
  Array rhs = req.op->adjoint(req.y) * d;
  rhs.axpy(s2, req.u);
  const double rhs_norm = norm(rhs);

  ProxResult res;
  res.x = req.u;
  Array r = rhs - normal_op(res.x);
  double rr = squared_norm(r);
  const double target = opts.tol * (rhs_norm > 0.0 ? rhs_norm : 1.0);
  Array p = r;
  int it = 0;
  while (std::sqrt(rr) > target && it < opts.max_iter) {
    const Array q = normal_op(p);
    const double alpha = rr / dot(p, q);
    res.x.axpy(alpha, p);
    r.axpy(-alpha, q);
    const double rr_new = squared_norm(r);
    p = r + p * (rr_new / rr);
    rr = rr_new;
    ++it;
  }
  res.iterations = it;
  res.residual = std::sqrt(rr) / (rhs_norm > 0.0 ? rhs_norm : 1.0);
  res.converged = std::sqrt(rr) <= target;
  res.objective = prox_objective(req, res.x);
  return res;
}

struct AdamOptions {
  int iters = 300;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment descent on the prox objective from x = u. Works for any
// operator exposing apply + vjp; used for nonlinear A such as |DFT(x)|.
inline ProxResult prox_nonlinear(const ProxRequest& req, AdamOptions opts = {}) {
  req.validate();
  const double scale = req.delta / (req.sigma_n * req.sigma_n);
  ProxResult res;
  res.x = req.u;
  Array m(req.u.shape()), v(req.u.shape());
  double b1t = 1.0, b2t = 1.0;
  Array grad(req.u.shape());
  for (int it = 1; it <= opts.iters; ++it) {
    grad = req.op->vjp(res.x, req.op->apply(res.x) - req.y) * scale;
    grad += res.x - req.u;
    b1t *= opts.beta1;
    b2t *= opts.beta2;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grad[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
      const double mh = m[i] / (1.0 - b1t), vh = v[i] / (1.0 - b2t);
      res.x[i] -= opts.lr * mh / (std::sqrt(vh) + opts.eps);
    }
    res.iterations = it;
  }
  res.objective = prox_objective(req, res.x);
  if (!std::isfinite(res.objective))
    throw Error("prox_nonlinear: objective became NaN/Inf after " +
                std::to_string(res.iterations) + " iterations (delta=" +
                std::to_string(req.delta) + ", sigma_n=" + std::to_string(req.sigma_n) + ")");
  res.residual = norm(grad);
  return res;
}

struct ProxOptions {
  CgOptions cg;
  AdamOptions adam;
};

// Dispatches on the operator's solver hint.
inline ProxResult prox(const ProxRequest& req, const ProxOptions& opts = {}) {
  switch (req.op->hint()) {
    case SolverHint::freq_diagonal: {
      ProxResult r;
      r.x = prox_freq(req);
      r.objective = prox_objective(req, r.x);
      return r;
    }
    case SolverHint::diagonal:
      if (req.op->kind() == OpKind::mask) {
        ProxResult r;
        r.x = prox_diag(req);
        r.objective = prox_objective(req, r.x);
        return r;
      }
      return prox_cg(req, opts.cg);
    case SolverHint::general_linear:
      return prox_cg(req, opts.cg);
    case SolverHint::nonlinear:
      return prox_nonlinear(req, opts.adam);
  }
  throw InvalidArgument("unknown solver hint");
}

}  // namespace latino
