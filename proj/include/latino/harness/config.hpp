#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latino/error.hpp"
#include "latino/proximal.hpp"
#include "latino/sae/analytic_prior.hpp"
#include "latino/sampler.hpp"
#include "latino/sapg.hpp"

namespace latino {

using json = nlohmann::json;

// Experiment description, stored as JSON. Parsing is strict: unknown keys and
// wrong types are errors, so to_json(from_json(j)) never drops information.

struct KernelSpec {
  std::string type = "gaussian";  // gaussian | motion | identity | file
  std::size_t size = 61;
  double sigma = 3.0;
  double intensity = 0.5;
  std::uint64_t seed = 0;
  std::string path;
};

struct MaskSpec {
  std::string type = "random";  // random | box | file
  double keep = 0.5;            // random: fraction of observed pixels
  std::uint64_t seed = 0;
  std::vector<std::size_t> box;  // box: y0, x0, h, w (hidden region)
  std::string path;
};

struct OperatorSpec {
  std::string kind = "conv";  // conv | downsample | mask | phase_retrieval | compose
  KernelSpec kernel;
  std::size_t factor = 4;
  std::string mode = "bicubic";
  MaskSpec mask;
  std::vector<OperatorSpec> children;
};

struct ImageSpec {
  std::string source = "builtin";  // builtin | png | tensor | prior_sample | none
  std::size_t size = 64;
  std::string path;
  std::vector<double> cond;  // prior_sample: the conditioning of the truth
};

struct PriorConfig {
  std::string kind = "analytic";  // analytic | remote
  Shape image_shape;              // empty: taken from the image
  std::size_t latent_dim = 0;     // 0: complete basis
  std::size_t cond_dim = 4;
  double amplitude = 0.05;
  double power = 1.0;
  double offset = 0.5;
  double cond_scale = 1.0;
  std::uint64_t seed = 0;
  std::string endpoint;  // remote:HOST:PORT or stdio:CMD ARGS
};

struct SamplerSpec {
  int n_steps = 8;
  std::vector<int> timesteps;
  std::string task = "gauss_deblur";
  std::vector<double> delta_overrides;
  std::optional<double> delta_constant;  // same delta at every step
  std::optional<double> delta_noise_scale;  // delta_k = scale * (1 - abar_{t_k})
  bool clamp = true;
  int chains = 1;
  CgOptions cg;
  AdamOptions adam;
};

struct SapgSpec {
  int M = 15;
  double radius = 15.0;
  GammaRule gamma;
  int inner_steps = 4;
  std::vector<int> inner_timesteps;
  bool allow_fd = true;
};

struct Seeds {
  std::uint64_t noise = 0;
  std::uint64_t sampler = 0;
};

enum class RunMode { restore, conjugate_verification };

inline std::string to_string(RunMode m) {
  return m == RunMode::restore ? "restore" : "conjugate_verification";
}

inline RunMode parse_run_mode(const std::string& s) {
  if (s == "restore") return RunMode::restore;
  if (s == "conjugate_verification") return RunMode::conjugate_verification;
  throw InvalidArgument("unknown mode '" + s + "'");
}

struct ExperimentConfig {
  std::string name = "experiment";
  RunMode mode = RunMode::restore;
  ImageSpec image;
  OperatorSpec op;
  double noise_sigma = 0.01;
  PriorConfig prior;
  std::vector<double> cond;  // c (LATINO) or c0 (LATINO-PRO); empty: zeros
  SamplerSpec sampler;
  std::optional<SapgSpec> sapg;
  Seeds seeds;
  std::string output_dir = "runs/experiment";
  std::string measurement;  // precomputed y (tensor file); empty: simulate

  void validate() const;
};

// ---- JSON mapping ---------------------------------------------------------

namespace detail {

// Reads keys out of an object and complains about anything left over.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument(where_ + "." + key + ": wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw InvalidArgument(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json to_json(const KernelSpec& k) {
  json j{{"type", k.type}};
  if (k.type == "gaussian") j["size"] = k.size, j["sigma"] = k.sigma;
  if (k.type == "motion") j["size"] = k.size, j["intensity"] = k.intensity, j["seed"] = k.seed;
  if (k.type == "file") j["path"] = k.path;
  return j;
}

inline KernelSpec kernel_from_json(const json& j, const std::string& where) {
  KernelSpec k;
  detail::Fields f(j, where);
  f.get("type", k.type);
  f.get("size", k.size);
  f.get("sigma", k.sigma);
  f.get("intensity", k.intensity);
  f.get("seed", k.seed);
  f.get("path", k.path);
  f.done();
  return k;
}

inline json to_json(const MaskSpec& m) {
  json j{{"type", m.type}};
  if (m.type == "random") j["keep"] = m.keep, j["seed"] = m.seed;
  if (m.type == "box") j["box"] = m.box;
  if (m.type == "file") j["path"] = m.path;
  return j;
}

inline MaskSpec mask_from_json(const json& j, const std::string& where) {
  MaskSpec m;
  detail::Fields f(j, where);
  f.get("type", m.type);
  f.get("keep", m.keep);
  f.get("seed", m.seed);
  f.get("box", m.box);
  f.get("path", m.path);
  f.done();
  return m;
}

inline json to_json(const OperatorSpec& op) {
  json j{{"kind", op.kind}};
  if (op.kind == "conv") j["kernel"] = to_json(op.kernel);
  if (op.kind == "downsample") j["factor"] = op.factor, j["mode"] = op.mode;
  if (op.kind == "mask") j["mask"] = to_json(op.mask);
  if (op.kind == "compose") {
    j["children"] = json::array();
    for (const auto& c : op.children) j["children"].push_back(to_json(c));
  }
  return j;
}

inline OperatorSpec operator_from_json(const json& j, const std::string& where) {
  OperatorSpec op;
  detail::Fields f(j, where);
  f.get("kind", op.kind);
  if (const json* k = f.sub("kernel")) op.kernel = kernel_from_json(*k, where + ".kernel");
  f.get("factor", op.factor);
  f.get("mode", op.mode);
  if (const json* m = f.sub("mask")) op.mask = mask_from_json(*m, where + ".mask");
  if (const json* ch = f.sub("children")) {
    if (!ch->is_array()) throw InvalidArgument(where + ".children: expected a list");
    for (std::size_t i = 0; i < ch->size(); ++i)
      op.children.push_back(
          operator_from_json((*ch)[i], where + ".children[" + std::to_string(i) + "]"));
  }
  f.done();
  return op;
}

inline json to_json(const ImageSpec& im) {
  json j{{"source", im.source}};
  if (im.source == "builtin") j["size"] = im.size;
  if (im.source == "png" || im.source == "tensor") j["path"] = im.path;
  if (im.source == "prior_sample") j["cond"] = im.cond;
  return j;
}

inline ImageSpec image_from_json(const json& j) {
  ImageSpec im;
  detail::Fields f(j, "image");
  f.get("source", im.source);
  f.get("size", im.size);
  f.get("path", im.path);
  f.get("cond", im.cond);
  f.done();
  return im;
}

inline json to_json(const PriorConfig& p) {
  if (p.kind == "remote") {
    json j{{"kind", p.kind}, {"endpoint", p.endpoint}};
    if (!p.image_shape.empty()) j["image_shape"] = p.image_shape;
    return j;
  }
  json j{{"kind", p.kind},         {"latent_dim", p.latent_dim}, {"cond_dim", p.cond_dim},
         {"amplitude", p.amplitude}, {"power", p.power},           {"offset", p.offset},
         {"cond_scale", p.cond_scale}, {"seed", p.seed}};
  if (!p.image_shape.empty()) j["image_shape"] = p.image_shape;
  return j;
}

inline PriorConfig prior_from_json(const json& j) {
  PriorConfig p;
  detail::Fields f(j, "prior");
  f.get("kind", p.kind);
  f.get("image_shape", p.image_shape);
  f.get("latent_dim", p.latent_dim);
  f.get("cond_dim", p.cond_dim);
  f.get("amplitude", p.amplitude);
  f.get("power", p.power);
  f.get("offset", p.offset);
  f.get("cond_scale", p.cond_scale);
  f.get("seed", p.seed);
  f.get("endpoint", p.endpoint);
  f.done();
  return p;
}

inline json to_json(const SamplerSpec& s) {
  json j{{"n_steps", s.n_steps},
         {"task", s.task},
         {"clamp", s.clamp},
         {"chains", s.chains},
         {"cg", {{"tol", s.cg.tol}, {"max_iter", s.cg.max_iter}}},
         {"adam",
          {{"iters", s.adam.iters},
           {"lr", s.adam.lr},
           {"beta1", s.adam.beta1},
           {"beta2", s.adam.beta2},
           {"eps", s.adam.eps}}}};
  if (!s.timesteps.empty()) j["timesteps"] = s.timesteps;
  if (s.delta_constant) j["delta"] = *s.delta_constant;
  else if (s.delta_noise_scale) j["delta"] = {{"noise_scale", *s.delta_noise_scale}};
  else if (!s.delta_overrides.empty()) j["delta"] = s.delta_overrides;
  return j;
}

inline SamplerSpec sampler_from_json(const json& j) {
  SamplerSpec s;
  detail::Fields f(j, "sampler");
  f.get("n_steps", s.n_steps);
  f.get("timesteps", s.timesteps);
  f.get("task", s.task);
  if (const json* d = f.sub("delta")) {
    if (d->is_number()) s.delta_constant = d->get<double>();
    else if (d->is_array()) s.delta_overrides = d->get<std::vector<double>>();
    else if (d->is_object()) {
      double scale = 0.0;
      detail::Fields g(*d, "sampler.delta");
      g.get("noise_scale", scale);
      g.done();
      s.delta_noise_scale = scale;
    } else {
      throw InvalidArgument("sampler.delta: expected a number, a list or {\"noise_scale\": k}");
    }
  }
  f.get("clamp", s.clamp);
  f.get("chains", s.chains);
  if (const json* cg = f.sub("cg")) {
    detail::Fields g(*cg, "sampler.cg");
    g.get("tol", s.cg.tol);
    g.get("max_iter", s.cg.max_iter);
    g.done();
  }
  if (const json* ad = f.sub("adam")) {
    detail::Fields g(*ad, "sampler.adam");
    g.get("iters", s.adam.iters);
    g.get("lr", s.adam.lr);
    g.get("beta1", s.adam.beta1);
    g.get("beta2", s.adam.beta2);
    g.get("eps", s.adam.eps);
    g.done();
  }
  f.done();
  return s;
}

inline json to_json(const SapgSpec& s) {
  json j{{"M", s.M},
         {"radius", s.radius},
         {"gamma0", s.gamma.gamma0},
         {"decay", s.gamma.decay},
         {"hold", s.gamma.hold},
         {"inner_steps", s.inner_steps},
         {"allow_fd", s.allow_fd}};
  if (!s.inner_timesteps.empty()) j["inner_timesteps"] = s.inner_timesteps;
  return j;
}

inline SapgSpec sapg_from_json(const json& j) {
  SapgSpec s;
  detail::Fields f(j, "sapg");
  f.get("M", s.M);
  f.get("radius", s.radius);
  f.get("gamma0", s.gamma.gamma0);
  f.get("decay", s.gamma.decay);
  f.get("hold", s.gamma.hold);
  f.get("inner_steps", s.inner_steps);
  f.get("inner_timesteps", s.inner_timesteps);
  f.get("allow_fd", s.allow_fd);
  f.done();
  return s;
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"name", c.name},
         {"mode", to_string(c.mode)},
         {"image", to_json(c.image)},
         {"operator", to_json(c.op)},
         {"noise_sigma", c.noise_sigma},
         {"prior", to_json(c.prior)},
         {"cond", c.cond},
         {"sampler", to_json(c.sampler)},
         {"seeds", {{"noise", c.seeds.noise}, {"sampler", c.seeds.sampler}}},
         {"output_dir", c.output_dir}};
  if (c.sapg) j["sapg"] = to_json(*c.sapg);
  if (!c.measurement.empty()) j["measurement"] = c.measurement;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  detail::Fields f(j, "config");
  f.get("name", c.name);
  std::string mode = to_string(c.mode);
  f.get("mode", mode);
  c.mode = parse_run_mode(mode);
  if (const json* im = f.sub("image")) c.image = image_from_json(*im);
  if (const json* op = f.sub("operator")) c.op = operator_from_json(*op, "operator");
  f.get("noise_sigma", c.noise_sigma);
  if (const json* p = f.sub("prior")) c.prior = prior_from_json(*p);
  f.get("cond", c.cond);
  if (const json* s = f.sub("sampler")) c.sampler = sampler_from_json(*s);
  if (const json* s = f.sub("sapg")) c.sapg = sapg_from_json(*s);
  if (const json* s = f.sub("seeds")) {
    detail::Fields g(*s, "seeds");
    g.get("noise", c.seeds.noise);
    g.get("sampler", c.seeds.sampler);
    g.done();
  }
  f.get("output_dir", c.output_dir);
  f.get("measurement", c.measurement);
  f.done();
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

// ---- translation to module configs ---------------------------------------

// Per-step deltas for a chain with the given timesteps (empty: use the task
// schedule).
inline std::vector<double> expand_deltas(const SamplerSpec& s, const std::vector<int>& ts,
                                         const NoiseSchedule& sch) {
  if (s.delta_constant) return std::vector<double>(ts.size(), *s.delta_constant);
  if (s.delta_noise_scale) {
    std::vector<double> d;
    for (int t : ts) d.push_back(*s.delta_noise_scale * sch.noise_var(t));
    return d;
  }
  return s.delta_overrides;
}

inline LatinoConfig latino_config(const SamplerSpec& s, std::uint64_t seed,
                                  const NoiseSchedule& sch = make_schedule()) {
  LatinoConfig cfg;
  cfg.n_steps = s.n_steps;
  cfg.timesteps = s.timesteps;
  cfg.task = parse_task(s.task);
  cfg.delta_overrides = expand_deltas(s, cfg.resolved_timesteps(), sch);
  cfg.seed = seed;
  cfg.clamp = s.clamp;
  cfg.prox.cg = s.cg;
  cfg.prox.adam = s.adam;
  return cfg;
}

inline SapgConfig sapg_config(const SamplerSpec& s, const SapgSpec& p, std::uint64_t seed,
                              const NoiseSchedule& sch = make_schedule()) {
  SapgConfig cfg;
  cfg.M = p.M;
  cfg.radius = p.radius;
  cfg.gamma = p.gamma;
  cfg.allow_fd = p.allow_fd;
  cfg.seed = seed;
  cfg.final_pass = latino_config(s, seed, sch);
  cfg.inner = cfg.final_pass;
  cfg.inner.n_steps = p.inner_steps;
  cfg.inner.timesteps = p.inner_timesteps;
  if (!s.delta_overrides.empty() && s.delta_overrides.size() != static_cast<std::size_t>(p.inner_steps))
    throw InvalidArgument("sapg: per-step delta list does not fit the inner chain; use a constant or noise_scale delta");
  cfg.inner.delta_overrides = expand_deltas(s, cfg.inner.resolved_timesteps(), sch);
  return cfg;
}

inline void ExperimentConfig::validate() const {
  if (!(noise_sigma > 0.0)) throw InvalidArgument("noise_sigma must be positive");
  static const std::set<std::string> sources{"builtin", "png", "tensor", "prior_sample", "none"};
  if (!sources.count(image.source)) throw InvalidArgument("unknown image source '" + image.source + "'");
  if (image.source == "none" && measurement.empty())
    throw InvalidArgument("image source 'none' needs a measurement file");
  if (prior.kind != "analytic" && prior.kind != "remote")
    throw InvalidArgument("prior kind must be analytic or remote, got '" + prior.kind + "'");
  if (prior.kind == "remote" && prior.endpoint.empty())
    throw InvalidArgument("remote prior needs an endpoint");
  if (image.source == "prior_sample" && prior.kind != "analytic")
    throw InvalidArgument("prior_sample images need the analytic prior");
  if (sampler.chains < 1) throw InvalidArgument("sampler.chains must be >= 1");
  if ((sampler.delta_constant ? 1 : 0) + (sampler.delta_noise_scale ? 1 : 0) +
          (sampler.delta_overrides.empty() ? 0 : 1) > 1)
    throw InvalidArgument("give delta as one of: a constant, a list, or a noise scale");
  latino_config(sampler, seeds.sampler).validate();
  if (sapg) sapg_config(sampler, *sapg, seeds.sampler).validate();
  if (mode == RunMode::conjugate_verification) {
    if (prior.kind != "analytic") throw InvalidArgument("conjugate verification needs the analytic prior");
    if (image.source != "prior_sample")
      throw InvalidArgument("conjugate verification draws its truth from the prior (image.source = prior_sample)");
    if (sampler.clamp) throw InvalidArgument("conjugate verification must run with clamp = false");
    if (sapg) throw InvalidArgument("conjugate verification does not use sapg");
  }
}

}  // namespace latino
