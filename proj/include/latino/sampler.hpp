#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latino/error.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/proximal.hpp"
#include "latino/rng.hpp"
#include "latino/sae/sae.hpp"

namespace latino {

enum class Task { gauss_deblur, motion_deblur, sr8, sr16, inpaint, custom };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::gauss_deblur: return "gauss_deblur";
    case Task::motion_deblur: return "motion_deblur";
    case Task::sr8: return "sr8";
    case Task::sr16: return "sr16";
    case Task::inpaint: return "inpaint";
    case Task::custom: return "custom";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  for (Task t : {Task::gauss_deblur, Task::motion_deblur, Task::sr8, Task::sr16, Task::inpaint,
                 Task::custom})
    if (to_string(t) == s) return t;
  throw InvalidArgument("unknown task '" + s + "'");
}

inline std::vector<int> default_timesteps(int n) {
  if (n == 4) return {999, 749, 499, 249};
  if (n == 8) return {999, 874, 749, 624, 499, 374, 249, 124};
  throw InvalidArgument("default timesteps exist for N = 4 or 8, got " + std::to_string(n));
}

// Step size for iteration k (1-based):
//   delta_k = C (1 - abar_{t_k}) |A u - y| / sigma_n
// with the per-task constant C switching at a late iteration, except for
// inpainting which has no residual factor.
inline double delta_schedule(Task task, int k, double residual, double sigma_n,
                             double alpha_bar_tk) {
  if (k < 1) throw InvalidArgument("iteration index k is 1-based");
  if (!(residual >= 0.0)) throw InvalidArgument("residual must be non-negative");
  if (!(sigma_n > 0.0)) throw InvalidArgument("sigma_n must be positive");
  const double one_minus = 1.0 - alpha_bar_tk;
  double C = 0.0;
  switch (task) {
    case Task::gauss_deblur: C = k >= 5 ? 2e-5 : 4e-5; break;
    case Task::motion_deblur: C = k >= 5 ? 4e-6 : 2e-6; break;
    case Task::sr8: C = k >= 6 ? 6e-3 : 3e-3; break;
    case Task::sr16: C = k >= 6 ? 2e-2 : 9e-3; break;
    case Task::inpaint: return k >= 5 ? one_minus : 0.5 * one_minus;
    case Task::custom:
      throw InvalidArgument("task 'custom' has no delta schedule; supply delta overrides");
  }
  return C * one_minus * residual / sigma_n;
}

// y = A x + n, n ~ N(0, sigma_n^2 I).
struct Problem {
  OpPtr op;
  Array y;
  double sigma_n = 0.01;
};

struct LatinoConfig {
  int n_steps = 8;
  std::vector<int> timesteps;  // empty: default_timesteps(n_steps)
  Task task = Task::gauss_deblur;
  std::vector<double> delta_overrides;
  std::uint64_t seed = 0;
  bool clamp = false;  // clamp decoded u to [0,1] before the prox
  ProxOptions prox;

  std::vector<int> resolved_timesteps() const {
    return timesteps.empty() ? default_timesteps(n_steps) : timesteps;
  }

  // Timesteps may repeat (a fixed t), never increase.
  void validate() const {
    if (n_steps < 1) throw InvalidArgument("n_steps must be >= 1");
    const auto ts = resolved_timesteps();
    if (ts.size() != static_cast<std::size_t>(n_steps))
      throw InvalidArgument("expected " + std::to_string(n_steps) + " timesteps, got " +
                            std::to_string(ts.size()));
    for (std::size_t i = 1; i < ts.size(); ++i)
      if (ts[i] > ts[i - 1]) throw InvalidArgument("timesteps must be non-increasing");
    if (!delta_overrides.empty() && delta_overrides.size() != ts.size())
      throw InvalidArgument("delta overrides must have one entry per step");
    if (task == Task::custom && delta_overrides.empty())
      throw InvalidArgument("task 'custom' requires explicit delta overrides");
  }
};

struct StepRecord {
  int k = 0;
  int t = 0;
  double alpha_bar = 0.0;
  double delta = 0.0;
  double residual = 0.0;  // |A u - y| at the decoded point
  double prox_objective = 0.0;
  double prox_residual = 0.0;
  int prox_iterations = 0;
  bool prox_converged = true;
};

struct ChainTrace {
  Array x_init;
  std::vector<StepRecord> steps;
  std::vector<Array> latents;  // z_{t_k} as encoded at step k
  Array x;
};

// Aborted chain; `trace` holds the steps completed before the failure.
class ChainAborted : public Error {
 public:
  ChainAborted(const std::string& what, ChainTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const ChainTrace& trace() const noexcept { return trace_; }

 private:
  ChainTrace trace_;
};

// LATINO: starting at x_init (default A^+ y), each step draws
// z = sqrt(abar) E(x) + sqrt(1 - abar) eps, decodes u = D(G(z, t, c)) and
// takes the implicit data step x = prox_{delta g_y}(u).
inline ChainTrace latino_run(const Problem& pb, const Prior& prior, const Array& c,
                             const LatinoConfig& cfg, Rng& rng,
                             const std::optional<Array>& x_init = std::nullopt) {
  cfg.validate();
  if (!pb.op) throw InvalidArgument("problem has no operator");
  if (!(pb.sigma_n > 0.0)) throw InvalidArgument("sigma_n must be positive");
  prior.check_cond(c);
  const auto ts = cfg.resolved_timesteps();
  for (int t : ts)
    if (!prior.supports_timestep(t))
      throw InvalidArgument("prior does not support timestep " + std::to_string(t));

  ChainTrace trace;
  trace.x_init = x_init ? *x_init : pb.op->pseudoinverse(pb.y);
  Array x = trace.x_init;
  for (int k = 1; k <= cfg.n_steps; ++k) {
    const int t = ts[static_cast<std::size_t>(k - 1)];
    StepRecord rec;
    rec.k = k;
    rec.t = t;
    rec.alpha_bar = prior.schedule().alpha_bar(t);
    try {
      Array z = encode_stochastic(x, t, prior, rng);
      Array u = prior.decode(prior.consistency(z, t, c));
      if (cfg.clamp) u = clamp(std::move(u), 0.0, 1.0);
      rec.residual = distance(pb.op->apply(u), pb.y);
      rec.delta = cfg.delta_overrides.empty()
                      ? delta_schedule(cfg.task, k, rec.residual, pb.sigma_n, rec.alpha_bar)
                      : cfg.delta_overrides[static_cast<std::size_t>(k - 1)];
      const ProxResult pr = prox({std::move(u), pb.y, pb.op, rec.delta, pb.sigma_n}, cfg.prox);
      rec.prox_objective = pr.objective;
      rec.prox_residual = pr.residual;
      rec.prox_iterations = pr.iterations;
      rec.prox_converged = pr.converged;
      x = pr.x;
      trace.latents.push_back(std::move(z));
    } catch (const std::exception& e) {
      trace.x = x;
      throw ChainAborted("LATINO step " + std::to_string(k) + " (t=" + std::to_string(t) +
                             "): " + e.what(),
                         std::move(trace));
    }
    trace.steps.push_back(rec);
  }
  trace.x = std::move(x);
  return trace;
}

inline ChainTrace latino_run(const Problem& pb, const Prior& prior, const Array& c,
                             const LatinoConfig& cfg) {
  Rng rng(cfg.seed);
  return latino_run(pb, prior, c, cfg, rng);
}

struct UlaResult {
  Array x;     // last iterate
  Array mean;  // running mean after burn-in
  bool diverged = false;
  int iterations = 0;
  std::vector<double> norms;  // |x| every `record_every` iterations
};

struct UlaConfig {
  double step = 1e-4;
  int n_iter = 1000;
  int burn_in = 0;
  int record_every = 100;
  double divergence_norm = 1e6;
  bool inject_noise = true;
};

// Euler-Maruyama on the posterior Langevin diffusion:
//   x <- x + h (A^T (y - A x) / sigma_n^2 + score(x)) + sqrt(2h) eps.
// Divergence (|x| above the threshold or non-finite) stops the run and sets
// the flag; it is a result, not an exception.
inline UlaResult ula_run(const Problem& pb, const std::function<Array(const Array&)>& prior_score,
                         const UlaConfig& cfg, Rng& rng, const Array& x0) {
  if (!(cfg.step > 0.0)) throw InvalidArgument("ULA step must be positive");
  if (!pb.op || !pb.op->is_linear()) throw InvalidArgument("ULA baseline needs a linear operator");
  UlaResult res;
  res.x = x0;
  res.mean = Array(x0.shape());
  const double inv_s2 = 1.0 / (pb.sigma_n * pb.sigma_n), noise = std::sqrt(2.0 * cfg.step);
  int kept = 0;
  for (int it = 1; it <= cfg.n_iter; ++it) {
    Array drift = pb.op->adjoint(pb.y - pb.op->apply(res.x)) * inv_s2;
    drift += prior_score(res.x);
    res.x.axpy(cfg.step, drift);
    if (cfg.inject_noise)
      for (double& v : res.x.values()) v += noise * rng.gaussian();
    res.iterations = it;
    const double nx = norm(res.x);
    if (cfg.record_every > 0 && it % cfg.record_every == 0) res.norms.push_back(nx);
    if (!std::isfinite(nx) || nx > cfg.divergence_norm) {
      res.diverged = true;
      return res;
    }
    if (it > cfg.burn_in) {
      ++kept;
      const double f = 1.0 / kept;
      for (std::size_t i = 0; i < res.mean.size(); ++i) res.mean[i] += f * (res.x[i] - res.mean[i]);
    }
  }
  return res;
}

}  // namespace latino
