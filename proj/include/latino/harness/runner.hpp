#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latino/equiv_hr.hpp"
#include "latino/error.hpp"
#include "latino/harness/config.hpp"
#include "latino/harness/conjugate.hpp"
#include "latino/harness/image_io.hpp"
#include "latino/harness/metrics.hpp"
#include "latino/harness/tensor_io.hpp"
#include "latino/harness/test_image.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/sae/analytic_prior.hpp"
#include "latino/sae/remote_prior.hpp"
#include "latino/sampler.hpp"
#include "latino/sapg.hpp"

namespace latino {

// An error from one stage of run_experiment; the message starts with the
// stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& msg)
      : Error(stage + ": " + msg), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

template <class F>
auto run_stage(const std::string& name, std::map<std::string, double>& timings, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto done = [&] {
    timings[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      done();
    } else {
      auto r = f();
      done();
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline std::uint64_t chain_seed(std::uint64_t base, std::uint64_t i) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json to_json(const Array& a) { return json(std::vector<double>(a.values().begin(), a.values().end())); }

}  // namespace detail

// ---- builders --------------------------------------------------------------

inline ConvKernel build_kernel(const KernelSpec& k) {
  if (k.type == "gaussian") return make_gaussian_kernel(k.size, k.sigma);
  if (k.type == "motion") return make_motion_kernel(k.seed, k.size, k.intensity);
  if (k.type == "identity") return ConvKernel::identity();
  if (k.type == "file") {
    Array t = load_array(k.path);
    if (t.rank() != 2) throw ShapeError("kernel file must hold a 2-D tensor");
    return ConvKernel(std::move(t));
  }
  throw InvalidArgument("unknown kernel type '" + k.type + "'");
}

inline Array build_mask(const MaskSpec& m, std::size_t rows, std::size_t cols) {
  if (m.type == "random") {
    if (!(m.keep >= 0.0 && m.keep <= 1.0)) throw InvalidArgument("mask keep must lie in [0,1]");
    Rng rng(m.seed);
    Array out({rows, cols});
    for (double& v : out.values()) v = rng.uniform() < m.keep ? 1.0 : 0.0;
    return out;
  }
  if (m.type == "box") {
    if (m.box.size() != 4) throw InvalidArgument("box mask needs [top, left, height, width]");
    return box_mask(rows, cols, m.box[0], m.box[1], m.box[2], m.box[3]);
  }
  if (m.type == "file") {
    Array t = load_array(m.path);
    if (t.shape() != Shape{rows, cols})
      throw ShapeError("mask file " + shape_string(t.shape()) + " does not match image");
    return t;
  }
  throw InvalidArgument("unknown mask type '" + m.type + "'");
}

inline OpPtr build_operator(const OperatorSpec& s, const Shape& domain) {
  if (domain.size() != 3) throw ShapeError("operator domain must be (C,H,W)");
  if (s.kind == "conv") return make_conv_op(build_kernel(s.kernel));
  if (s.kind == "downsample") return make_downsample_op(s.factor, parse_downsample_mode(s.mode));
  if (s.kind == "mask") return make_mask_op(build_mask(s.mask, domain[1], domain[2]));
  if (s.kind == "phase_retrieval") return make_phase_retrieval_op();
  if (s.kind == "compose") {
    std::vector<OpPtr> ops;
    Shape d = domain;
    for (const auto& c : s.children) {
      ops.push_back(build_operator(c, d));
      d = ops.back()->range_shape(d);
    }
    return make_compose_op(std::move(ops));
  }
  throw InvalidArgument("unknown operator kind '" + s.kind + "'");
}

inline std::shared_ptr<Prior> build_prior(const PriorConfig& p, const Shape& image_shape) {
  if (p.kind == "remote") return connect_remote_prior(p.endpoint);
  AnalyticPriorSpec spec;
  spec.image_shape = p.image_shape.empty() ? image_shape : p.image_shape;
  if (spec.image_shape != image_shape)
    throw ShapeError("prior image shape " + shape_string(spec.image_shape) +
                     " does not match the image " + shape_string(image_shape));
  spec.latent_dim = p.latent_dim == 0 ? shape_size(spec.image_shape) : p.latent_dim;
  spec.cond_dim = p.cond_dim;
  spec.amplitude = p.amplitude;
  spec.power = p.power;
  spec.offset = p.offset;
  spec.cond_scale = p.cond_scale;
  spec.seed = p.seed;
  return make_analytic_prior(spec);
}

inline Array cond_vector(const std::vector<double>& v, std::size_t dim, const char* what) {
  if (v.empty()) return Array({dim});
  if (v.size() != dim)
    throw ShapeError(std::string(what) + " has " + std::to_string(v.size()) +
                     " entries, prior expects " + std::to_string(dim));
  return Array({dim}, std::vector<double>(v));
}

// ---- measurement -----------------------------------------------------------

struct Measurement {
  std::optional<Array> x_true;
  std::optional<Array> c_true;
  Array y;
  OpPtr op;
  Shape domain;
  std::shared_ptr<Prior> prior;
};

// Builds truth, operator, prior and y. Timings are added under "degrade" and
// "prior".
inline Measurement simulate(const ExperimentConfig& cfg, std::map<std::string, double>& timings) {
  Measurement m;
  Rng noise(cfg.seeds.noise);
  const auto& im = cfg.image;

  detail::run_stage("degrade", timings, [&] {
    if (im.source == "builtin") m.x_true = builtin_test_image(im.size);
    if (im.source == "png") m.x_true = load_image_array(im.path);
    if (im.source == "tensor") m.x_true = load_array(im.path);
  });

  Shape domain;
  if (m.x_true) domain = m.x_true->shape();
  else if (!cfg.prior.image_shape.empty()) domain = cfg.prior.image_shape;
  else if (im.source != "prior_sample")
    throw StageError("degrade", "image shape unknown: set prior.image_shape when no image is given");

  m.prior = detail::run_stage("prior", timings, [&] {
    if (domain.empty()) {
      if (cfg.prior.image_shape.empty())
        throw InvalidArgument("prior_sample images need prior.image_shape");
      domain = cfg.prior.image_shape;
    }
    return build_prior(cfg.prior, domain);
  });
  m.domain = domain;

  detail::run_stage("degrade", timings, [&] {
    if (im.source == "prior_sample") {
      const auto* ap = dynamic_cast<const AnalyticGaussianPrior*>(m.prior.get());
      m.c_true = cond_vector(im.cond, ap->cond_dim(), "image.cond");
      m.x_true = ap->sample(*m.c_true, noise);
    }
    m.op = build_operator(cfg.op, m.domain);
    if (!cfg.measurement.empty()) {
      m.y = load_array(cfg.measurement);
      if (m.y.shape() != m.op->range_shape(m.domain))
        throw ShapeError("measurement " + shape_string(m.y.shape()) + " does not match operator range " +
                         shape_string(m.op->range_shape(m.domain)));
    } else {
      if (!m.x_true) throw InvalidArgument("no image to degrade");
      m.y = m.op->apply(*m.x_true);
      m.y.axpy(cfg.noise_sigma, noise.gaussian_like(m.y.shape()));
    }
  });
  return m;
}

// ---- run record ------------------------------------------------------------

struct RunRecord {
  ExperimentConfig config;
  std::string created_at;
  std::vector<ChainTrace> traces;  // first chains only, see kTraceLimit
  int chains = 0;
  std::optional<PromptState> prompt;
  std::map<std::string, double> metrics;
  std::map<std::string, double> timings;  // seconds per stage
  std::map<std::string, std::string> outputs;
  Array x_hat;
};

inline constexpr std::size_t kTraceLimit = 4;

inline json to_json(const StepRecord& s) {
  return json{{"k", s.k},
              {"t", s.t},
              {"alpha_bar", s.alpha_bar},
              {"delta", s.delta},
              {"residual", s.residual},
              {"prox_objective", s.prox_objective},
              {"prox_residual", s.prox_residual},
              {"prox_iterations", s.prox_iterations},
              {"prox_converged", s.prox_converged}};
}

inline json to_json(const RunRecord& r) {
  json j{{"config", to_json(r.config)},
         {"created_at", r.created_at},
         {"chains", r.chains},
         {"metrics", r.metrics},
         {"timings", r.timings},
         {"outputs", r.outputs}};
  j["traces"] = json::array();
  for (const auto& t : r.traces) {
    json steps = json::array();
    for (const auto& s : t.steps) steps.push_back(to_json(s));
    j["traces"].push_back({{"steps", steps}});
  }
  if (r.prompt) {
    json hist = json::array(), grads = json::array();
    for (const auto& c : r.prompt->history) hist.push_back(detail::to_json(c));
    for (const auto& g : r.prompt->grads) grads.push_back(detail::to_json(g));
    j["prompt"] = {{"c0", detail::to_json(r.prompt->c0)},
                   {"c", detail::to_json(r.prompt->c)},
                   {"history", hist},
                   {"grads", grads},
                   {"gammas", r.prompt->gammas}};
  }
  return j;
}

// Equal up to wall-clock fields.
inline bool records_match(json a, json b) {
  for (json* j : {&a, &b}) {
    j->erase("created_at");
    j->erase("timings");
  }
  return a == b;
}

struct RunOptions {
  bool write_outputs = true;
};

namespace detail {

inline bool image_like(const Array& a) {
  return a.rank() == 3 && (a.channels() == 1 || a.channels() == 3);
}

inline void restore_metrics(RunRecord& rec, const Measurement& m, const Array& x_init) {
  auto& mt = rec.metrics;
  mt["residual"] = distance(m.op->apply(rec.x_hat), m.y);
  if (!m.x_true) return;
  const Array& x = *m.x_true;
  mt["psnr_restored"] = psnr(rec.x_hat, x);
  mt["psnr_init"] = psnr(x_init, x);
  if (m.y.shape() == x.shape() && m.op->is_linear()) {
    mt["psnr_degraded"] = psnr(m.y, x);
    mt["gain_db"] = mt["psnr_restored"] - mt["psnr_degraded"];
  }
  if (rec.chains > 1 && !rec.traces.empty()) mt["psnr_single_chain"] = psnr(rec.traces.front().x, x);
}

inline void write_outputs(RunRecord& rec, const Measurement& m,
                          const std::map<std::string, Array>& extra = {}) {
  namespace fs = std::filesystem;
  const fs::path dir = rec.config.output_dir;
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const Array& a) {
    const std::string t = (dir / (name + ".lten")).string();
    save_tensor(t, a);
    rec.outputs[name] = t;
    if (image_like(a)) {
      const std::string p = (dir / (name + ".png")).string();
      save_image(p, a);
      rec.outputs[name + "_png"] = p;
    }
  };
  if (m.x_true) put("x_true", *m.x_true);
  put("y", m.y);
  put("x_hat", rec.x_hat);
  for (const auto& [name, a] : extra) put(name, a);
  rec.outputs["record"] = (dir / "record.json").string();
}

}  // namespace detail

inline void save_record(const RunRecord& rec) {
  const auto it = rec.outputs.find("record");
  if (it == rec.outputs.end()) return;
  std::ofstream out(it->second);
  if (!out) throw IoError("cannot write '" + it->second + "'");
  out << to_json(rec).dump(2) << '\n';
}

inline RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  RunRecord rec;
  rec.config = cfg;
  rec.created_at = detail::utc_timestamp();
  detail::run_stage("config", rec.timings, [&] { cfg.validate(); });
  Measurement m = simulate(cfg, rec.timings);
  const Prior& prior = *m.prior;
  const Problem pb{m.op, m.y, cfg.noise_sigma};
  const Array c = detail::run_stage("prior", rec.timings,
                                    [&] { return cond_vector(cfg.cond, prior.cond_dim(), "cond"); });

  if (cfg.mode == RunMode::conjugate_verification) {
    const auto& ap = dynamic_cast<const AnalyticGaussianPrior&>(prior);
    const LatinoConfig lc = latino_config(cfg.sampler, cfg.seeds.sampler, prior.schedule());
    const std::size_t n = shape_size(m.domain);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), sq = sum;
    detail::run_stage("solve", rec.timings, [&] {
      for (int i = 0; i < cfg.sampler.chains; ++i) {
        Rng rng(detail::chain_seed(cfg.seeds.sampler, static_cast<std::uint64_t>(i)));
        ChainTrace tr = latino_run(pb, prior, c, lc, rng);
        const Eigen::VectorXd x = as_vector(tr.x);
        sum += x;
        sq += x.cwiseProduct(x);
        if (rec.traces.size() < kTraceLimit) rec.traces.push_back(std::move(tr));
      }
    });
    rec.chains = cfg.sampler.chains;
    detail::run_stage("metrics", rec.timings, [&] {
      const double N = cfg.sampler.chains;
      const Eigen::VectorXd mean = sum / N;
      Eigen::VectorXd var = sq / N - mean.cwiseProduct(mean);
      if (N > 1) var *= N / (N - 1);
      const auto post = gaussian_posterior(prior_moments(ap, c), operator_matrix(*m.op, m.domain),
                                           as_vector(m.y), cfg.noise_sigma * cfg.noise_sigma);
      const Eigen::VectorXd pv = post.cov.diagonal();
      rec.metrics["mean_rel_err"] = (mean - post.mean).norm() / post.mean.norm();
      rec.metrics["var_rel_err"] = (var - pv).norm() / pv.norm();
      rec.metrics["mean_max_abs_err"] = (mean - post.mean).cwiseAbs().maxCoeff();
      rec.x_hat = as_array(mean, m.domain);
      if (opts.write_outputs)
        detail::write_outputs(rec, m,
                              {{"chain_var", as_array(var, m.domain)},
                               {"posterior_mean", as_array(post.mean, m.domain)},
                               {"posterior_var", as_array(pv, m.domain)}});
    });
  } else if (cfg.sapg) {
    SapgResult res = detail::run_stage("solve", rec.timings, [&] {
      Rng rng(cfg.seeds.sampler);
      return latino_pro_run(pb, prior, c, sapg_config(cfg.sampler, *cfg.sapg, cfg.seeds.sampler, prior.schedule()), rng);
    });
    rec.chains = 1;
    rec.x_hat = res.x;
    rec.traces.push_back(res.final_trace);
    rec.prompt = res.prompt;
    detail::run_stage("metrics", rec.timings, [&] {
      detail::restore_metrics(rec, m, res.final_trace.x_init);
      rec.metrics["prompt_shift"] = distance(res.prompt.c, res.prompt.c0);
      if (m.c_true) {
        const double d0 = distance(res.prompt.c0, *m.c_true);
        rec.metrics["prompt_error"] = distance(res.prompt.c, *m.c_true);
        if (d0 > 0.0) rec.metrics["prompt_error_ratio"] = rec.metrics["prompt_error"] / d0;
      }
      const auto* ap = dynamic_cast<const AnalyticGaussianPrior*>(&prior);
      if (ap && m.op->is_linear() && shape_size(m.domain) <= 1024) {
        const auto A = operator_matrix(*m.op, m.domain);
        const auto y = as_vector(m.y);
        const double s2 = cfg.noise_sigma * cfg.noise_sigma;
        rec.metrics["log_ml_c0"] = log_marginal(prior_moments(*ap, res.prompt.c0), A, y, s2);
        rec.metrics["log_ml_c"] = log_marginal(prior_moments(*ap, res.prompt.c), A, y, s2);
      }
      if (opts.write_outputs) detail::write_outputs(rec, m);
    });
  } else {
    const LatinoConfig lc = latino_config(cfg.sampler, cfg.seeds.sampler, prior.schedule());
    Array x_init;
    detail::run_stage("solve", rec.timings, [&] {
      const int K = cfg.sampler.chains;
      for (int i = 0; i < K; ++i) {
        Rng rng(K == 1 ? cfg.seeds.sampler
                       : detail::chain_seed(cfg.seeds.sampler, static_cast<std::uint64_t>(i)));
        ChainTrace tr = latino_run(pb, prior, c, lc, rng);
        if (i == 0) {
          x_init = tr.x_init;
          rec.x_hat = Array(tr.x.shape());
        }
        rec.x_hat.axpy(1.0 / K, tr.x);
        if (rec.traces.size() < kTraceLimit) rec.traces.push_back(std::move(tr));
      }
    });
    rec.chains = cfg.sampler.chains;
    detail::run_stage("metrics", rec.timings, [&] {
      detail::restore_metrics(rec, m, x_init);
      if (opts.write_outputs) detail::write_outputs(rec, m);
    });
  }
  if (opts.write_outputs) detail::run_stage("write", rec.timings, [&] { save_record(rec); });
  return rec;
}

// Re-runs the configuration stored in a record and checks that the metrics
// come out identical.
struct ReplayResult {
  bool match = false;
  json stored;
  json fresh;
};

inline ReplayResult replay_record(const json& record) {
  if (!record.contains("config") || !record.contains("metrics"))
    throw InvalidArgument("not a run record (missing config or metrics)");
  const RunRecord fresh = run_experiment(config_from_json(record["config"]), {.write_outputs = false});
  ReplayResult r;
  r.stored = record["metrics"];
  r.fresh = json(fresh.metrics);
  r.match = r.stored == r.fresh;
  return r;
}

}  // namespace latino
