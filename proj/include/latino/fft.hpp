#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

namespace latino::fft {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

enum class Direction { forward, backward };

namespace detail {

// FFTW's planner is not thread-safe; plans are created once per
// (rows, cols, direction) under a lock and executed with the new-array API,
// which is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t rows, std::size_t cols, Direction dir) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, dir);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(rows * cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(
        static_cast<int>(rows), static_cast<int>(cols), buf, buf,
        dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, Direction>, fftw_plan> plans_;
};

}  // namespace detail

// In-place unnormalized 2-D DFT of a row-major rows x cols buffer.
// The backward transform is the adjoint of the forward one (no 1/N factor).
inline void transform(std::span<Complex> buf, std::size_t rows, std::size_t cols,
                      Direction dir) {
  fftw_plan plan = detail::PlanCache::instance().get(rows, cols, dir);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plan, p, p);
}

inline Spectrum forward_real(std::span<const double> plane, std::size_t rows,
                             std::size_t cols) {
  Spectrum out(plane.begin(), plane.end());
  transform(out, rows, cols, Direction::forward);
  return out;
}

// Normalized inverse; returns the real part.
inline std::vector<double> inverse_real(Spectrum spec, std::size_t rows,
                                        std::size_t cols) {
  transform(spec, rows, cols, Direction::backward);
  const double scale = 1.0 / static_cast<double>(rows * cols);
  std::vector<double> out(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = spec[i].real() * scale;
  return out;
}

// Signed frequency of DFT bin `k` on a grid of `n` samples, in (-n/2, n/2].
inline long signed_frequency(std::size_t k, std::size_t n) {
  const long kk = static_cast<long>(k), nn = static_cast<long>(n);
  return 2 * kk > nn ? kk - nn : kk;
}

}  // namespace latino::fft
