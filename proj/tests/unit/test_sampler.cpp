#include <gtest/gtest.h>

#include "latino/sampler.hpp"
#include "support/gaussian.hpp"

using namespace latino;

namespace {

std::shared_ptr<AnalyticGaussianPrior> conj_prior(std::uint64_t seed = 1) {
  AnalyticPriorSpec spec;
  spec.image_shape = {1, 8, 8};
  spec.latent_dim = 64;
  spec.cond_dim = 2;
  spec.amplitude = 0.05;
  spec.seed = seed;
  spec.cond_scale = 0.1;
  return make_analytic_prior(spec);
}

// Prior that forwards to another one but fails on the n-th consistency call.
class FailingPrior final : public Prior {
 public:
  FailingPrior(std::shared_ptr<const Prior> inner, int fail_at)
      : inner_(std::move(inner)), fail_at_(fail_at) {}
  PriorKind kind() const override { return inner_->kind(); }
  Shape latent_shape() const override { return inner_->latent_shape(); }
  std::size_t cond_dim() const override { return inner_->cond_dim(); }
  const NoiseSchedule& schedule() const override { return inner_->schedule(); }
  bool supports_timestep(int t) const override { return inner_->supports_timestep(t); }
  Array encode(const Array& x) const override { return inner_->encode(x); }
  Array decode(const Array& z) const override { return inner_->decode(z); }
  Array consistency(const Array& z, int t, const Array& c) const override {
    if (++calls_ == fail_at_) throw ProtocolError("connection reset");
    return inner_->consistency(z, t, c);
  }

 private:
  std::shared_ptr<const Prior> inner_;
  int fail_at_;
  mutable int calls_ = 0;
};

}  // namespace

TEST(Timesteps, Defaults) {
  EXPECT_EQ(default_timesteps(4), (std::vector<int>{999, 749, 499, 249}));
  EXPECT_EQ(default_timesteps(8), (std::vector<int>{999, 874, 749, 624, 499, 374, 249, 124}));
  EXPECT_THROW(default_timesteps(2), InvalidArgument);
}

TEST(DeltaSchedule, SpecExamples) {
  EXPECT_DOUBLE_EQ(delta_schedule(Task::gauss_deblur, 6, 100.0 * 0.01, 0.01, 0.5),
                   2e-5 * 0.5 * 1.0 / 0.01);
  EXPECT_NEAR(delta_schedule(Task::gauss_deblur, 6, 1.0, 0.01, 0.5), 1e-3, 1e-18);
  EXPECT_DOUBLE_EQ(delta_schedule(Task::inpaint, 2, 123.0, 0.01, 0.2), 0.4);
  EXPECT_EQ(delta_schedule(Task::sr8, 3, 0.0, 0.01, 0.3), 0.0);
}

TEST(DeltaSchedule, AllBranches) {
  struct Probe {
    Task task;
    int k;
    double C;
  };
  const Probe probes[] = {
      {Task::gauss_deblur, 5, 2e-5}, {Task::gauss_deblur, 4, 4e-5},
      {Task::motion_deblur, 5, 4e-6}, {Task::motion_deblur, 1, 2e-6},
      {Task::sr8, 6, 6e-3},           {Task::sr8, 5, 3e-3},
      {Task::sr16, 8, 2e-2},          {Task::sr16, 2, 9e-3},
  };
  const double res = 0.37, sig = 0.01, ab = 0.123;
  for (const auto& p : probes)
    EXPECT_EQ(delta_schedule(p.task, p.k, res, sig, ab), p.C * (1.0 - ab) * res / sig)
        << to_string(p.task) << " k=" << p.k;
  EXPECT_EQ(delta_schedule(Task::inpaint, 5, res, sig, ab), 1.0 - ab);
  EXPECT_EQ(delta_schedule(Task::inpaint, 4, res, sig, ab), 0.5 * (1.0 - ab));
}

TEST(DeltaSchedule, Rejections) {
  EXPECT_THROW(delta_schedule(Task::custom, 1, 1.0, 0.1, 0.5), InvalidArgument);
  EXPECT_THROW(delta_schedule(Task::gauss_deblur, 0, 1.0, 0.1, 0.5), InvalidArgument);
  EXPECT_THROW(delta_schedule(Task::gauss_deblur, 1, -1.0, 0.1, 0.5), InvalidArgument);
  EXPECT_THROW(delta_schedule(Task::gauss_deblur, 1, 1.0, 0.0, 0.5), InvalidArgument);
  EXPECT_THROW(parse_task("denoise"), InvalidArgument);
  EXPECT_EQ(parse_task("sr16"), Task::sr16);
}

TEST(LatinoConfig, Validation) {
  LatinoConfig cfg;
  cfg.n_steps = 4;
  EXPECT_NO_THROW(cfg.validate());
  cfg.timesteps = {999, 749, 499};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.timesteps = {249, 499, 749, 999};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.timesteps = {10, 10, 10, 10};
  EXPECT_NO_THROW(cfg.validate());
  cfg.task = Task::custom;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.delta_overrides = {1, 1, 1, 1};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Latino, HardDataConsistencyLimit) {
  const auto prior = conj_prior();
  Rng rng(1);
  const Array c({2}, 0.0);
  const Array x_true = prior->sample(c, rng);
  Problem pb{make_identity_op(), x_true, 1e-6};
  LatinoConfig cfg;
  cfg.task = Task::custom;
  cfg.delta_overrides.assign(8, 1e6);
  const auto tr = latino_run(pb, *prior, c, cfg, rng);
  EXPECT_LT(max_abs_diff(tr.x, x_true), 1e-3);
}

TEST(Latino, SeedReproducible) {
  const auto prior = conj_prior();
  Rng data(2);
  const Array c = data.gaussian_like({2});
  Problem pb{make_conv_op(make_gaussian_kernel(3, 0.7)), data.uniform_like({1, 8, 8}), 0.05};
  LatinoConfig cfg;
  cfg.seed = 42;
  const auto a = latino_run(pb, *prior, c, cfg);
  const auto b = latino_run(pb, *prior, c, cfg);
  EXPECT_TRUE(a.x == b.x);
  cfg.seed = 43;
  EXPECT_FALSE(latino_run(pb, *prior, c, cfg).x == a.x);
}

TEST(Latino, TraceComplete) {
  const auto prior = conj_prior();
  Rng data(3);
  Problem pb{make_downsample_op(2, DownsampleMode::avgpool), data.uniform_like({1, 4, 4}), 0.01};
  LatinoConfig cfg;
  cfg.n_steps = 4;
  cfg.task = Task::sr8;
  const auto tr = latino_run(pb, *prior, Array({2}), cfg);
  ASSERT_EQ(tr.steps.size(), 4u);
  ASSERT_EQ(tr.latents.size(), 4u);
  const auto ts = default_timesteps(4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(tr.steps[i].k, static_cast<int>(i + 1));
    EXPECT_EQ(tr.steps[i].t, ts[i]);
    EXPECT_TRUE(std::isfinite(tr.steps[i].delta));
    EXPECT_TRUE(std::isfinite(tr.steps[i].residual));
    EXPECT_TRUE(std::isfinite(tr.steps[i].prox_objective));
    EXPECT_TRUE(tr.steps[i].prox_converged);
  }
  EXPECT_TRUE(all_finite(tr.x));
  EXPECT_TRUE(tr.x_init == pb.op->pseudoinverse(pb.y));
}

TEST(Latino, ExplicitInitialState) {
  const auto prior = conj_prior();
  Problem pb{make_identity_op(), Array({1, 8, 8}, 0.5), 0.1};
  LatinoConfig cfg;
  cfg.n_steps = 4;
  Rng rng(4);
  const Array x0({1, 8, 8}, 0.25);
  EXPECT_TRUE(latino_run(pb, *prior, Array({2}), cfg, rng, x0).x_init == x0);
}

TEST(Latino, ResidualNonIncreasingOnNoiselessIdentity) {
  const auto prior = conj_prior();
  Rng rng(5);
  const Array c({2}, 0.3);
  const Array x_true = prior->sample(c, rng);
  Problem pb{make_identity_op(), x_true, 1e-3};
  LatinoConfig cfg;
  cfg.task = Task::custom;
  for (int k = 1; k <= 8; ++k) cfg.delta_overrides.push_back(std::pow(10.0, k - 6));
  // Track |x_k - y| by re-running prefixes with the same seed.
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 8; ++n) {
    LatinoConfig sub = cfg;
    sub.n_steps = n;
    const auto all = default_timesteps(8);
    sub.timesteps.assign(all.begin(), all.begin() + n);
    sub.delta_overrides.resize(static_cast<std::size_t>(n));
    Rng r(77);
    const double misfit = distance(latino_run(pb, *prior, c, sub, r).x, x_true);
    EXPECT_LE(misfit, prev);
    prev = misfit;
  }
}

TEST(Latino, AbortKeepsPartialTrace) {
  const auto prior = conj_prior();
  FailingPrior bad(prior, 3);
  Problem pb{make_identity_op(), Array({1, 8, 8}, 0.5), 0.1};
  LatinoConfig cfg;
  try {
    latino_run(pb, bad, Array({2}), cfg);
    FAIL();
  } catch (const ChainAborted& e) {
    EXPECT_EQ(e.trace().steps.size(), 2u);
    EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("connection reset"), std::string::npos);
  }
}

TEST(Latino, RejectsUnsupportedOrMismatched) {
  const auto prior = conj_prior();
  Problem pb{make_identity_op(), Array({1, 8, 8}, 0.5), 0.1};
  LatinoConfig cfg;
  EXPECT_THROW(latino_run(pb, *prior, Array({3}), cfg), ShapeError);
  cfg.task = Task::custom;
  EXPECT_THROW(latino_run(pb, *prior, Array({2}), cfg), InvalidArgument);
}

// Empirical moments over many chains against exact moment propagation of the
// same linear-Gaussian recursion, and against the closed-form posterior.
TEST(Latino, ConjugateMomentsMatchOracle) {
  const auto prior = conj_prior(11);
  const auto m = oracle::prior_mats(*prior);
  Rng data(6);
  const Array c = data.gaussian_like({2});
  const double s2 = 1e-3;
  const Array x_true = prior->sample(c, data);
  Problem pb{make_identity_op(), x_true + data.gaussian_like({1, 8, 8}) * std::sqrt(s2),
             std::sqrt(s2)};
  const int t = 8;
  const double delta = (1.0 - prior->schedule().alpha_bar(t)) / 3.0;
  LatinoConfig cfg;
  cfg.timesteps.assign(8, t);
  cfg.task = Task::custom;
  cfg.delta_overrides.assign(8, delta);

  const int chains = 600;
  Array mean({1, 8, 8}), sq({1, 8, 8});
  Rng rng(7);
  for (int i = 0; i < chains; ++i) {
    const auto x = latino_run(pb, *prior, c, cfg, rng).x;
    mean.axpy(1.0 / chains, x);
    sq.axpy(1.0 / chains, hadamard(x, x));
  }
  const oracle::Mat A = oracle::Mat::Identity(64, 64);
  const oracle::Vec y = oracle::to_vec(pb.y), cv = oracle::to_vec(c);
  const auto chain = oracle::chain_moments(m, cv, A, y, s2, y, cfg.timesteps,
                                           cfg.delta_overrides, prior->schedule());
  const auto post = oracle::posterior(oracle::prior_x(m, cv), A, y, s2);
  const oracle::Vec em = oracle::to_vec(mean);
  oracle::Vec ev = oracle::to_vec(sq) - em.cwiseProduct(em);
  ev *= static_cast<double>(chains) / (chains - 1);
  // Sampling tolerance for the mean: 5 standard errors per coordinate.
  for (Eigen::Index i = 0; i < 64; ++i)
    EXPECT_LT(std::abs(em[i] - chain.mean[i]), 5.0 * std::sqrt(chain.cov(i, i) / chains)) << i;
  EXPECT_LT(oracle::rel_err(ev, oracle::Vec(chain.cov.diagonal())), 0.1);
  EXPECT_LT(oracle::rel_err(em, post.mean), 0.02);
  EXPECT_LT(oracle::rel_err(oracle::Vec(chain.cov.diagonal()), oracle::Vec(post.cov.diagonal())),
            0.05);
}

TEST(Ula, StaysAtModeWithoutNoise) {
  const auto prior = conj_prior(12);
  Rng data(8);
  const Array c = data.gaussian_like({2});
  Problem pb{make_identity_op(), data.uniform_like({1, 8, 8}), 0.1};
  const auto m = oracle::prior_mats(*prior);
  const auto post = oracle::posterior(oracle::prior_x(m, oracle::to_vec(c)),
                                      oracle::Mat::Identity(64, 64), oracle::to_vec(pb.y), 0.01);
  const Array mode = oracle::from_vec(post.mean, {1, 8, 8});
  UlaConfig cfg;
  cfg.step = 1e-4;
  cfg.n_iter = 50;
  cfg.inject_noise = false;
  Rng rng(9);
  const auto res =
      ula_run(pb, [&](const Array& x) { return prior->score(x, c); }, cfg, rng, mode);
  EXPECT_FALSE(res.diverged);
  EXPECT_LT(max_abs_diff(res.x, mode), 1e-9);
}

TEST(Ula, DivergesAboveStabilityBound) {
  const auto prior = conj_prior(13);
  Problem pb{make_identity_op(), Array({1, 8, 8}, 0.5), 0.1};
  const Array c({2});
  const auto m = oracle::prior_mats(*prior);
  const oracle::Mat H = oracle::Mat::Identity(64, 64) / 0.01 +
                        m.Q.transpose() * m.s.cwiseInverse().asDiagonal() * m.Q;
  const double L = Eigen::SelfAdjointEigenSolver<oracle::Mat>(H).eigenvalues().maxCoeff();
  UlaConfig cfg;
  cfg.step = 10.0 / L;
  cfg.n_iter = 2000;
  Rng rng(10);
  const auto res =
      ula_run(pb, [&](const Array& x) { return prior->score(x, c); }, cfg, rng, pb.y);
  EXPECT_TRUE(res.diverged);
  EXPECT_LT(res.iterations, 2000);
}

TEST(Ula, ScoreNeedsCompleteBasis) {
  AnalyticPriorSpec spec;
  spec.latent_dim = 10;
  const auto p = make_analytic_prior(spec);
  EXPECT_THROW(p->score(Array({1, 8, 8}), Array({4})), InvalidArgument);
}
