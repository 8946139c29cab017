// Command-line front end: solve, solve-pro, degrade, hrlift, verify, serve-echo.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "latino/latino.hpp"

using namespace latino;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string prior;
  std::optional<int> steps;
  std::string task;
  std::string measurement;
  std::optional<int> chains;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "experiment config (JSON)");
  app->add_option("--seed", o.seed, "sampler seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--prior", o.prior, "analytic | remote:HOST:PORT | stdio:CMD");
  app->add_option("--steps", o.steps, "number of LATINO steps (4 or 8)");
  app->add_option("--task", o.task, "delta schedule: gauss_deblur, motion_deblur, sr8, sr16, inpaint, custom");
  app->add_option("--measurement", o.measurement, "precomputed measurement y (tensor file)");
  app->add_option("--chains", o.chains, "independent chains averaged into the estimate");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seeds.sampler = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.prior.empty()) {
    if (o.prior == "analytic") {
      cfg.prior.kind = "analytic";
    } else {
      cfg.prior.kind = "remote";
      cfg.prior.endpoint = o.prior;
    }
  }
  if (o.steps) {
    cfg.sampler.n_steps = *o.steps;
    cfg.sampler.timesteps.clear();
  }
  if (!o.task.empty()) cfg.sampler.task = o.task;
  if (!o.measurement.empty()) cfg.measurement = o.measurement;
  if (o.chains) cfg.sampler.chains = *o.chains;
  cfg.validate();
  return cfg;
}

void print_record(const RunRecord& rec) {
  std::printf("run '%s' (%s, %d chain%s)\n", rec.config.name.c_str(), to_string(rec.config.mode).c_str(),
              rec.chains, rec.chains == 1 ? "" : "s");
  for (const auto& [k, v] : rec.metrics) std::printf("  %-22s %.6g\n", k.c_str(), v);
  double total = 0.0;
  for (const auto& [k, v] : rec.timings) total += v;
  std::printf("  %-22s %.3f s\n", "wall_time", total);
  if (auto it = rec.outputs.find("record"); it != rec.outputs.end())
    std::printf("  record: %s\n", it->second.c_str());
}

int cmd_solve(const Overrides& o, bool pro) {
  ExperimentConfig cfg = resolve(o);
  if (pro && !cfg.sapg) cfg.sapg = SapgSpec{};
  if (!pro) cfg.sapg.reset();
  cfg.validate();
  print_record(run_experiment(cfg));
  return 0;
}

int cmd_degrade(const Overrides& o) {
  ExperimentConfig cfg = resolve(o);
  std::map<std::string, double> timings;
  const Measurement m = simulate(cfg, timings);
  fs::create_directories(cfg.output_dir);
  const fs::path dir = cfg.output_dir;
  save_tensor((dir / "y.lten").string(), m.y);
  std::printf("y: %s -> %s\n", shape_string(m.y.shape()).c_str(), (dir / "y.lten").c_str());
  if (m.y.rank() == 3 && (m.y.channels() == 1 || m.y.channels() == 3))
    save_image((dir / "y.png").string(), m.y);
  if (m.x_true) {
    save_tensor((dir / "x_true.lten").string(), *m.x_true);
    if (m.x_true->channels() == 1 || m.x_true->channels() == 3)
      save_image((dir / "x_true.png").string(), *m.x_true);
  }
  return 0;
}

struct HrliftArgs {
  std::string kernel;
  std::vector<double> gaussian;  // size, sigma
  std::size_t factor = 2;
  std::string method = "shannon";
  std::vector<std::size_t> lr_size;
  std::string out;
  std::string image;
  std::string subsample;
};

int cmd_hrlift(const HrliftArgs& a) {
  if (a.kernel.empty() == a.gaussian.empty())
    throw InvalidArgument("give exactly one of --kernel or --gaussian SIZE SIGMA");
  const ConvKernel h = a.kernel.empty()
                           ? make_gaussian_kernel(static_cast<std::size_t>(a.gaussian.at(0)), a.gaussian.at(1))
                           : build_kernel({.type = "file", .path = a.kernel});
  Array image;
  if (!a.image.empty())
    image = a.image.ends_with(".png") ? load_image_array(a.image) : load_array(a.image);
  std::size_t lr_h = 0, lr_w = 0;
  if (a.lr_size.size() == 2) {
    lr_h = a.lr_size[0], lr_w = a.lr_size[1];
  } else if (!image.empty()) {
    lr_h = image.height() / a.factor, lr_w = image.width() / a.factor;
  }
  const LiftMethod method =
      a.method == "bicubic" ? LiftMethod::bicubic_upsample : LiftMethod::shannon_zero_pad;
  if (a.method != "bicubic" && a.method != "shannon")
    throw InvalidArgument("--method must be shannon or bicubic");
  const ConvKernel H = lift_kernel(h, a.factor, method, lr_h, lr_w);
  std::printf("lifted %zux%zu -> %zux%zu (factor %zu, %s)\n", h.rows(), h.cols(), H.rows(), H.cols(),
              a.factor, a.method.c_str());
  if (!a.out.empty()) {
    save_tensor(a.out, H.taps());
    std::printf("  kernel: %s\n", a.out.c_str());
  }
  if (!image.empty()) {
    const SubsampleKind kind =
        parse_subsample_kind(a.subsample.empty() ? (a.method == "bicubic" ? "bicubic" : "shannon") : a.subsample);
    const double err = verify_equivalence(image, h, H, {a.factor, kind});
    std::printf("  verify_equivalence (%s): %.3e\n", to_string(kind).c_str(), err);
  }
  return 0;
}

// Quick invariant suite; one PASS/FAIL line per check.
int run_invariants() {
  int failed = 0;
  auto check = [&](const std::string& name, double value, double tol) {
    const bool ok = value <= tol;
    failed += !ok;
    std::printf("%s %-34s %.3e (tol %.0e)\n", ok ? "PASS" : "FAIL", name.c_str(), value, tol);
  };
  Rng rng(2024);
  const Array x = rng.uniform_like({1, 32, 32});
  auto adjoint_gap = [&](const DegradationOp& op) {
    const Array y = rng.uniform_like(op.range_shape(x.shape()));
    const double l = dot(op.apply(x), y), r = dot(x, op.adjoint(y));
    return std::abs(l - r) / std::abs(l);
  };
  check("adjoint conv", adjoint_gap(*make_conv_op(make_gaussian_kernel(7, 1.5))), 1e-10);
  for (auto mode : {DownsampleMode::avgpool, DownsampleMode::bicubic, DownsampleMode::shannon})
    check("adjoint downsample " + to_string(mode), adjoint_gap(*make_downsample_op(4, mode)), 1e-10);
  check("adjoint mask", adjoint_gap(*make_mask_op(build_mask({}, 32, 32))), 1e-10);

  const auto conv = make_conv_op(make_gaussian_kernel(9, 2.0));
  const ProxRequest req{rng.uniform_like(x.shape()), conv->apply(x), conv, 0.5, 0.05};
  const Array pf = prox_freq(req), pc = prox_cg(req).x;
  check("prox_freq vs prox_cg", distance(pf, pc) / norm(pc), 1e-6);

  const Array hr = rng.uniform_like({1, 64, 64});
  const ConvKernel h = make_gaussian_kernel(9, 1.5);
  check("shannon equivalence", verify_equivalence(hr, h, lift_kernel(h, 2, LiftMethod::shannon_zero_pad, 32, 32),
                                                  {2, SubsampleKind::shannon}),
        1e-5);
  Array q({1, 64, 64});
  for (double& v : q.values()) v = std::floor(rng.uniform() * 256.0) / 256.0;
  check("avgpool compose (8,2)", compose_check(q, 8, 2, DownsampleMode::avgpool), 0.0);

  const wire::Frame f{wire::Opcode::decode, wire::Writer().tensor(tensor_cast<float>(x)).take()};
  const Tensor back = wire::Reader(f.payload).tensor();
  check("wire tensor round trip", max_abs_diff(back, tensor_cast<float>(x)), 0.0);
  std::printf("%d check%s failed\n", failed, failed == 1 ? "" : "s");
  return failed ? 1 : 0;
}

int cmd_verify(const std::string& record) {
  if (record.empty()) return run_invariants();
  std::ifstream in(record);
  if (!in) throw IoError("cannot open '" + record + "'");
  const json j = json::parse(in);
  const ReplayResult r = replay_record(j);
  std::printf("%s replay of %s\n", r.match ? "PASS" : "FAIL", record.c_str());
  if (!r.match) std::printf("  stored %s\n  fresh  %s\n", r.stored.dump().c_str(), r.fresh.dump().c_str());
  return r.match ? 0 : 1;
}

struct EchoArgs {
  int port = 0;
  bool stdio = false;
  std::string host = "127.0.0.1";
  std::vector<std::size_t> shape{1, 8, 8};
  std::uint32_t cond_dim = 4;
  std::vector<int> timesteps{999, 874, 749, 624, 499, 374, 249, 124};
};

int cmd_serve_echo(const EchoArgs& a) {
  EchoConfig cfg{a.shape, a.cond_dim, a.timesteps};
  if (a.stdio) {
    wire::FdStream s(0, 1, false);
    serve_echo(s, cfg);
    return 0;
  }
  const auto [fd, port] = wire::listen_tcp(a.port, a.host);
  std::printf("listening on %s:%d\n", a.host.c_str(), port);
  std::fflush(stdout);
  std::atomic<bool> stop{false};
  serve_echo_tcp(fd, cfg, stop);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LATINO / LATINO-PRO inverse-problem solver"};
  app.require_subcommand(1);

  Overrides solve_o, pro_o, degrade_o;
  auto* solve = app.add_subcommand("solve", "run LATINO on a configured experiment");
  add_common(solve, solve_o);
  auto* pro = app.add_subcommand("solve-pro", "run LATINO-PRO (prompt optimization)");
  add_common(pro, pro_o);
  auto* degrade = app.add_subcommand("degrade", "simulate a measurement and write it out");
  add_common(degrade, degrade_o);

  HrliftArgs hr;
  auto* hrlift = app.add_subcommand("hrlift", "lift a low-resolution kernel to the high-resolution grid");
  hrlift->add_option("--kernel", hr.kernel, "kernel tensor file");
  hrlift->add_option("--gaussian", hr.gaussian, "SIZE SIGMA of a Gaussian kernel")->expected(2);
  hrlift->add_option("--factor", hr.factor, "integer factor s");
  hrlift->add_option("--method", hr.method, "shannon | bicubic");
  hrlift->add_option("--lr-size", hr.lr_size, "H W of the low-resolution grid")->expected(2);
  hrlift->add_option("--out", hr.out, "write the lifted kernel here");
  hrlift->add_option("--image", hr.image, "HR image (png or tensor) to verify the equivalence on");
  hrlift->add_option("--subsample", hr.subsample, "shannon | smooth_spectral | bicubic");

  std::string record;
  auto* verify = app.add_subcommand("verify", "run the invariant suite, or replay a run record");
  verify->add_option("--record", record, "record.json to replay");

  EchoArgs echo;
  auto* serve = app.add_subcommand("serve-echo", "prior server that echoes latents (protocol tests)");
  serve->add_option("--port", echo.port, "TCP port (0 = any free port)");
  serve->add_option("--host", echo.host, "bind address");
  serve->add_flag("--stdio", echo.stdio, "serve one session on stdin/stdout");
  serve->add_option("--shape", echo.shape, "advertised latent shape");
  serve->add_option("--cond-dim", echo.cond_dim, "advertised conditioning dimension");
  serve->add_option("--timesteps", echo.timesteps, "advertised timesteps");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(solve_o, false);
    if (*pro) return cmd_solve(pro_o, true);
    if (*degrade) return cmd_degrade(degrade_o);
    if (*hrlift) return cmd_hrlift(hr);
    if (*verify) return cmd_verify(record);
    if (*serve) return cmd_serve_echo(echo);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
