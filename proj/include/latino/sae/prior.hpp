#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latino/sae/schedule.hpp"
#include "latino/tensor.hpp"

namespace latino {

enum class PriorKind { analytic, remote };

inline std::string to_string(PriorKind k) { return k == PriorKind::analytic ? "analytic" : "remote"; }

// Contract of the stochastic auto-encoder: ambient encoder/decoder, the
// consistency map G(z_t, t, c) and, optionally, the closed-form gradient of
// log p(z_next | z_prev, c) with respect to c.
class Prior {
 public:
  virtual ~Prior() = default;

  virtual PriorKind kind() const = 0;
  virtual Shape latent_shape() const = 0;
  virtual std::size_t cond_dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;
  virtual bool supports_timestep(int t) const = 0;

  virtual Array encode(const Array& x) const = 0;
  virtual Array decode(const Array& z) const = 0;
  virtual Array consistency(const Array& z, int t, const Array& c) const = 0;

  // Empty when the prior cannot differentiate; callers fall back to finite
  // differences.
  virtual std::optional<Array> grad_logcond(const Array& z_next, const Array& z_prev,
                                            int t_prev, int t_next, const Array& c) const {
    (void)z_next, (void)z_prev, (void)t_prev, (void)t_next, (void)c;
    return std::nullopt;
  }

  void check_cond(const Array& c) const {
    if (c.shape() != Shape{cond_dim()})
      throw ShapeError("conditioning vector " + shape_string(c.shape()) + " expected (" +
                       std::to_string(cond_dim()) + ")");
  }
};

}  // namespace latino
