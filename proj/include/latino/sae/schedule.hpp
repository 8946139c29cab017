#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latino/error.hpp"

namespace latino {

// VP diffusion schedule. beta[s-1] holds beta_s for s = 1..T and
// alpha_bar[t] = prod_{s<=t} (1 - beta_s), alpha_bar[0] = 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.empty()) throw InvalidArgument("noise schedule needs T >= 1");
    alpha_bar_.reserve(beta_.size() + 1);
    alpha_bar_.push_back(1.0);
    for (double b : beta_) {
      if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("beta must lie in (0,1)");
      alpha_bar_.push_back(alpha_bar_.back() * (1.0 - b));
    }
  }

  int T() const noexcept { return static_cast<int>(beta_.size()); }
  const std::vector<double>& beta() const noexcept { return beta_; }
  const std::vector<double>& alpha_bar() const noexcept { return alpha_bar_; }

  double alpha_bar(int t) const {
    check(t);
    return alpha_bar_[static_cast<std::size_t>(t)];
  }
  double sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar(t)); }
  // 1 - alpha_bar_t.
  double noise_var(int t) const { return 1.0 - alpha_bar(t); }

  void check(int t) const {
    if (t < 0 || t > T())
      throw InvalidArgument("timestep " + std::to_string(t) + " outside [0, " +
                            std::to_string(T()) + "]");
  }

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

enum class ScheduleKind { linear_ddpm };

// Linear DDPM: beta from 1e-4 to 2e-2 in T equal steps.
inline NoiseSchedule make_schedule(ScheduleKind kind = ScheduleKind::linear_ddpm, int T = 1000) {
  if (T < 1) throw InvalidArgument("noise schedule needs T >= 1");
  (void)kind;
  constexpr double lo = 1e-4, hi = 2e-2;
  std::vector<double> beta(static_cast<std::size_t>(T));
  for (int s = 0; s < T; ++s)
    beta[static_cast<std::size_t>(s)] = T == 1 ? lo : lo + (hi - lo) * s / (T - 1);
  return NoiseSchedule(std::move(beta));
}

}  // namespace latino
