#pragma once

#include <cmath>
#include <memory>

#include "latino/error.hpp"
#include "latino/rng.hpp"
#include "latino/sae/dct.hpp"
#include "latino/sae/prior.hpp"

namespace latino {

// Conditional Gaussian prior x = b + Q^T z, z ~ N(W c, diag(s)), with Q the
// truncated orthonormal DCT. Everything the sampler needs is available in
// closed form:
//
//   G(z_t, t, c) = w + r_t (z_t - sqrt(abar_t) w),   w = W c,
//   r_t = sqrt(s) / sqrt(abar_t s + 1 - abar_t),
//
// i.e. the probability-flow ODE between N(sqrt(abar_t) w, abar_t s + 1 - abar_t)
// and N(w, s) is a per-coordinate affine rescale.
class AnalyticGaussianPrior final : public Prior {
 public:
  // W is (d, d_c) row-major, s is (d), b has the image shape.
  AnalyticGaussianPrior(Shape image_shape, Array offset, Array cond_map, Array latent_vars,
                        NoiseSchedule schedule = make_schedule())
      : basis_(std::move(image_shape), latent_vars.size()),
        b_(std::move(offset)),
        W_(std::move(cond_map)),
        s_(std::move(latent_vars)),
        schedule_(std::move(schedule)) {
    const std::size_t d = basis_.dim();
    if (b_.shape() != basis_.image_shape())
      throw ShapeError("prior offset " + shape_string(b_.shape()) + " does not match image " +
                       shape_string(basis_.image_shape()));
    if (s_.shape() != Shape{d}) throw ShapeError("latent variances must be a vector");
    if (W_.rank() != 2 || W_.extent(0) != d)
      throw ShapeError("cond map must be (" + std::to_string(d) + ", d_c), got " +
                       shape_string(W_.shape()));
    for (double v : s_.values())
      if (!(v > 0.0)) throw InvalidArgument("latent variances must be positive");
  }

  PriorKind kind() const override { return PriorKind::analytic; }
  Shape latent_shape() const override { return {basis_.dim()}; }
  std::size_t cond_dim() const override { return W_.extent(1); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  bool supports_timestep(int t) const override { return t >= 0 && t <= schedule_.T(); }

  const Shape& image_shape() const noexcept { return basis_.image_shape(); }
  std::size_t latent_dim() const noexcept { return basis_.dim(); }
  const DctBasis& basis() const noexcept { return basis_; }
  const Array& offset() const noexcept { return b_; }
  const Array& cond_map() const noexcept { return W_; }
  const Array& latent_vars() const noexcept { return s_; }

  Array encode(const Array& x) const override { return basis_.analyze(x - b_); }
  Array decode(const Array& z) const override { return b_ + basis_.synthesize(z); }

  // W c.
  Array mean_latent(const Array& c) const {
    check_cond(c);
    const std::size_t d = latent_dim(), k = cond_dim();
    Array w({d});
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += W_(i, j) * c[j];
      w[i] = acc;
    }
    return w;
  }

  // W^T v.
  Array cond_map_transpose(const Array& v) const {
    const std::size_t d = latent_dim(), k = cond_dim();
    Array out({k});
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < k; ++j) out[j] += W_(i, j) * v[i];
    return out;
  }

  // r_t per coordinate.
  Array flow_gain(int t) const {
    const double ab = schedule_.alpha_bar(t);
    Array r(s_.shape());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = std::sqrt(s_[i]) / std::sqrt(ab * s_[i] + 1.0 - ab);
    return r;
  }

  Array consistency(const Array& z, int t, const Array& c) const override {
    check_latent(z);
    const Array w = mean_latent(c);
    const Array r = flow_gain(t);
    const double sab = schedule_.sqrt_alpha_bar(t);
    Array out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = w[i] + r[i] * (z[i] - sab * w[i]);
    return out;
  }

  // grad_c log N(z_next; sqrt(abar_n) G(z_prev, t_prev, c), (1 - abar_n) I)
  //   = sqrt(abar_n)/(1 - abar_n) W^T [(1 - rho) * (z_next - sqrt(abar_n) G)],
  // rho = r_{t_prev} sqrt(abar_{t_prev}).
  std::optional<Array> grad_logcond(const Array& z_next, const Array& z_prev, int t_prev,
                                    int t_next, const Array& c) const override {
    check_latent(z_next);
    if (t_next <= 0) throw InvalidArgument("t_next must be positive (zero transition variance)");
    const Array g = consistency(z_prev, t_prev, c);
    const Array r = flow_gain(t_prev);
    const double sab_p = schedule_.sqrt_alpha_bar(t_prev);
    const double sab_n = schedule_.sqrt_alpha_bar(t_next), var_n = schedule_.noise_var(t_next);
    Array v(z_next.shape());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = (1.0 - r[i] * sab_p) * (z_next[i] - sab_n * g[i]);
    return cond_map_transpose(v) * (sab_n / var_n);
  }

  // Ambient score grad_x log p(x|c) = -Q^T S^{-1} (Q (x - b) - W c). Needs a
  // complete basis (d == n), otherwise the prior has no ambient density.
  Array score(const Array& x, const Array& c) const {
    if (latent_dim() != shape_size(image_shape()))
      throw InvalidArgument("ambient score needs a complete basis (latent dim == pixels)");
    Array z = encode(x) - mean_latent(c);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = -z[i] / s_[i];
    return basis_.synthesize(z);
  }

  // Exact draw from p(x|c).
  Array sample(const Array& c, Rng& rng) const {
    Array z = mean_latent(c);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::sqrt(s_[i]) * rng.gaussian();
    return decode(z);
  }

 private:
  void check_latent(const Array& z) const {
    if (z.shape() != latent_shape())
      throw ShapeError("latent " + shape_string(z.shape()) + " expected " +
                       shape_string(latent_shape()));
  }

  DctBasis basis_;
  Array b_;
  Array W_;
  Array s_;
  NoiseSchedule schedule_;
};

// Variances amplitude / (1 + ky + kx)^power in DCT coefficient order.
inline Array smoothness_variances(const DctBasis& basis, double amplitude, double power) {
  Array s({basis.dim()});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& ix = basis.indices()[i];
    s[i] = amplitude / std::pow(1.0 + static_cast<double>(ix.ky + ix.kx), power);
  }
  return s;
}

struct AnalyticPriorSpec {
  Shape image_shape{1, 8, 8};
  std::size_t latent_dim = 64;
  std::size_t cond_dim = 4;
  double amplitude = 0.05;  // variance of the DC coefficient
  double power = 1.0;
  double offset = 0.5;
  double cond_scale = 1.0;  // std of the entries of W
  std::uint64_t seed = 0;   // draws W
};

inline std::shared_ptr<AnalyticGaussianPrior> make_analytic_prior(const AnalyticPriorSpec& spec) {
  DctBasis basis(spec.image_shape, spec.latent_dim);
  Array s = smoothness_variances(basis, spec.amplitude, spec.power);
  Rng rng(spec.seed);
  Array W({spec.latent_dim, spec.cond_dim});
  for (double& v : W.values()) v = spec.cond_scale * rng.gaussian();
  return std::make_shared<AnalyticGaussianPrior>(spec.image_shape,
                                                 Array(spec.image_shape, spec.offset),
                                                 std::move(W), std::move(s));
}

}  // namespace latino
