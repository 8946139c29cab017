#pragma once

#include <cmath>
#include <numbers>

#include "latino/error.hpp"
#include "latino/rng.hpp"
#include "latino/sae/analytic_prior.hpp"
#include "latino/sae/prior.hpp"

namespace latino {

// z_t = sqrt(abar_t) E(x) + sqrt(1 - abar_t) eps.
inline Array encode_stochastic(const Array& x, int t, const Prior& prior, Rng& rng) {
  const auto& sch = prior.schedule();
  sch.check(t);
  Array z = prior.encode(x);
  const double a = sch.sqrt_alpha_bar(t), s = std::sqrt(sch.noise_var(t));
  z *= a;
  if (s > 0.0)
    for (double& v : z.values()) v += s * rng.gaussian();
  return z;
}

inline Array consistency_apply(const Array& z, int t, const Array& c, const Prior& prior) {
  if (!prior.supports_timestep(t))
    throw InvalidArgument("prior does not support timestep " + std::to_string(t));
  prior.check_cond(c);
  return prior.consistency(z, t, c);
}

// One pass of the stochastic auto-encoder D_{t,c} o E_t.
inline Array sae_step(const Array& x, int t, const Array& c, const Prior& prior, Rng& rng) {
  return prior.decode(consistency_apply(encode_stochastic(x, t, prior, rng), t, c, prior));
}

// log N(z_next; sqrt(abar_n) G(z_prev, t_prev, c), (1 - abar_n) I).
inline double log_cond_density(const Array& z_next, const Array& z_prev, int t_prev, int t_next,
                               const Array& c, const Prior& prior) {
  if (t_next <= 0) throw InvalidArgument("t_next must be positive (zero transition variance)");
  const auto& sch = prior.schedule();
  const double sab = sch.sqrt_alpha_bar(t_next), var = sch.noise_var(t_next);
  const Array g = consistency_apply(z_prev, t_prev, c, prior);
  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = z_next[i] - sab * g[i];
    sq += r * r;
  }
  const double n = static_cast<double>(g.size());
  return -0.5 * sq / var - 0.5 * n * std::log(2.0 * std::numbers::pi * var);
}

inline constexpr double kGradFdStep = 1e-4;

// grad_c log p(z_next | z_prev, c). Uses the prior's own gradient when it has
// one, otherwise central differences of log_cond_density (2 d_c consistency
// evaluations).
inline Array grad_logcond_c(const Array& z_next, const Array& z_prev, int t_prev, int t_next,
                            const Array& c, const Prior& prior, bool allow_fd = true) {
  prior.check_cond(c);
  if (auto g = prior.grad_logcond(z_next, z_prev, t_prev, t_next, c)) return *g;
  if (!allow_fd)
    throw InvalidArgument("prior has no gradient and finite differences are disabled");
  Array g(c.shape());
  for (std::size_t j = 0; j < c.size(); ++j) {
    Array cp = c, cm = c;
    cp[j] += kGradFdStep;
    cm[j] -= kGradFdStep;
    g[j] = (log_cond_density(z_next, z_prev, t_prev, t_next, cp, prior) -
            log_cond_density(z_next, z_prev, t_prev, t_next, cm, prior)) /
           (2.0 * kGradFdStep);
  }
  return g;
}

}  // namespace latino
