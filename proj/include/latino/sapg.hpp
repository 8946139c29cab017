#pragma once

#include <cmath>
#include <vector>

#include "latino/error.hpp"
#include "latino/sampler.hpp"

namespace latino {

// gamma_m = gamma0 * decay^max(0, m - hold).
struct GammaRule {
  double gamma0 = 0.1;
  double decay = 0.9;
  int hold = 10;
};

inline double gamma_schedule(int m, const GammaRule& rule = {}) {
  if (m < 1) throw InvalidArgument("outer iteration m is 1-based");
  return rule.gamma0 * std::pow(rule.decay, std::max(0, m - rule.hold));
}

// Projection onto the ball B(c0, r).
inline Array project_ball(const Array& c, const Array& c0, double r) {
  if (!(r > 0.0)) throw InvalidArgument("ball radius must be positive");
  const double d = distance(c, c0);
  if (d <= r) return c;
  Array out = c - c0;
  out *= r / d;
  out += c0;
  return out;
}

struct ChainLatent {
  Array z;
  int t = 0;
};

// sum_i log p(z_{i+1} | z_i, c) over consecutive entries.
inline double chain_log_density(const std::vector<ChainLatent>& chain, const Array& c,
                                const Prior& prior) {
  if (chain.size() < 2) throw InvalidArgument("chain needs at least two latents");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i)
    s += log_cond_density(chain[i + 1].z, chain[i].z, chain[i].t, chain[i + 1].t, c, prior);
  return s;
}

// grad_c of chain_log_density. The caller decides which latents take part.
inline Array chain_grad(const std::vector<ChainLatent>& chain, const Array& c, const Prior& prior,
                        bool allow_fd = true) {
  if (chain.size() < 2) throw InvalidArgument("chain needs at least two latents");
  Array g(c.shape());
  for (std::size_t i = 0; i + 1 < chain.size(); ++i)
    g += grad_logcond_c(chain[i + 1].z, chain[i].z, chain[i].t, chain[i + 1].t, c, prior,
                        allow_fd);
  return g;
}

struct SapgConfig {
  int M = 15;
  double radius = 15.0;
  GammaRule gamma;
  LatinoConfig inner;  // n_steps 4 by default
  LatinoConfig final_pass;
  bool allow_fd = true;
  std::uint64_t seed = 0;

  SapgConfig() {
    inner.n_steps = 4;
    final_pass.n_steps = 8;
  }

  void validate() const {
    if (M < 1) throw InvalidArgument("SAPG needs M >= 1");
    if (!(radius > 0.0)) throw InvalidArgument("SAPG radius must be positive");
    inner.validate();
    final_pass.validate();
    if (inner.n_steps < 2) throw InvalidArgument("inner chains need at least two steps");
  }
};

struct PromptState {
  Array c0;
  Array c;
  std::vector<Array> history;  // c_0, c_1, ..., c_M
  std::vector<Array> grads;    // chain gradient used at iteration m
  std::vector<double> gammas;
};

struct SapgResult {
  Array x;
  PromptState prompt;
  std::vector<ChainTrace> inner_traces;
  ChainTrace final_trace;
};

// LATINO-PRO. Each outer iteration runs a short LATINO chain from the carried
// state, forms the chain gradient over [anchor, z_{t_1}, ..., z_{t_{N-1}}]
// (the last transition is left out) and takes a projected ascent step on c.
// The anchor is a forward-noised encoding of A^+ y at the last inner timestep
// in the first iteration, then the previous chain's final latent. A final
// chain with the 8-step schedule is run from A^+ y with the estimated c.
inline SapgResult latino_pro_run(const Problem& pb, const Prior& prior, const Array& c0,
                                 const SapgConfig& cfg, Rng& rng) {
  cfg.validate();
  prior.check_cond(c0);
  SapgResult res;
  PromptState& st = res.prompt;
  st.c0 = c0;
  st.c = c0;
  st.history.push_back(c0);

  const auto inner_ts = cfg.inner.resolved_timesteps();
  const Array x_dagger = pb.op->pseudoinverse(pb.y);
  Array x = x_dagger;
  ChainLatent anchor{encode_stochastic(x_dagger, inner_ts.back(), prior, rng), inner_ts.back()};

  for (int m = 1; m <= cfg.M; ++m) {
    ChainTrace tr = latino_run(pb, prior, st.c, cfg.inner, rng, x);
    std::vector<ChainLatent> chain{anchor};
    for (std::size_t i = 0; i + 1 < tr.latents.size(); ++i)
      chain.push_back({tr.latents[i], inner_ts[i]});
    const Array g = chain_grad(chain, st.c, prior, cfg.allow_fd);
    const double gamma = gamma_schedule(m, cfg.gamma);
    Array next = st.c;
    next.axpy(gamma, g);
    st.c = project_ball(next, c0, cfg.radius);
    st.history.push_back(st.c);
    st.grads.push_back(g);
    st.gammas.push_back(gamma);

    anchor = {tr.latents.back(), inner_ts.back()};
    x = tr.x;
    res.inner_traces.push_back(std::move(tr));
  }
  res.final_trace = latino_run(pb, prior, st.c, cfg.final_pass, rng, x_dagger);
  res.x = res.final_trace.x;
  return res;
}

}  // namespace latino
