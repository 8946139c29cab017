#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "latino/error.hpp"
#include "latino/tensor.hpp"

namespace latino {

// 2-D convolution kernel with odd extents; the centre tap sits at
// (rows/2, cols/2).
class ConvKernel {
 public:
  explicit ConvKernel(Array taps) : taps_(std::move(taps)) {
    if (taps_.rank() != 2)
      throw ShapeError("kernel must be 2-D, got " + shape_string(taps_.shape()));
    if (rows() % 2 == 0 || cols() % 2 == 0)
      throw InvalidArgument("kernel extents must be odd, got " +
                            shape_string(taps_.shape()));
  }

  static ConvKernel identity() { return ConvKernel(Array({1, 1}, 1.0)); }

  const Array& taps() const noexcept { return taps_; }
  std::size_t rows() const { return taps_.extent(0); }
  std::size_t cols() const { return taps_.extent(1); }
  double operator()(std::size_t i, std::size_t j) const { return taps_(i, j); }

  double sum() const {
    double s = 0.0;
    for (double v : taps_.values()) s += v;
    return s;
  }

  // Kernel mirrored through its centre (the adjoint of convolution).
  ConvKernel flipped() const {
    Array out(taps_.shape());
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = 0; j < cols(); ++j)
        out(rows() - 1 - i, cols() - 1 - j) = taps_(i, j);
    return ConvKernel(std::move(out));
  }

 private:
  Array taps_;
};

inline ConvKernel normalized(Array taps) {
  double s = 0.0;
  for (double v : taps.values()) s += v;
  if (!(s > 0.0)) throw InvalidArgument("kernel taps must have positive sum");
  taps *= 1.0 / s;
  return ConvKernel(std::move(taps));
}

inline ConvKernel make_gaussian_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0) throw InvalidArgument("gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian sigma must be positive");
  const double c = static_cast<double>(size / 2);
  Array taps({size, size});
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) - c, dx = static_cast<double>(j) - c;
      taps(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return normalized(std::move(taps));
}

struct PathPoint {
  double x;
  double y;
};

// Seeded random-walk trajectory behind make_motion_kernel.
//
// The walk takes (size-1)/2 unit steps starting with a horizontal heading.
// Before each step the heading turns by intensity * (pi/2) * g with
// g ~ N(0,1) drawn from mt19937_64(seed). The returned points are shifted so
// the bounding box is centred on the origin.
inline std::vector<PathPoint> motion_path(std::uint64_t seed, std::size_t size,
                                          double intensity) {
  if (size % 2 == 0) throw InvalidArgument("motion kernel size must be odd");
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw InvalidArgument("motion intensity must lie in [0,1]");
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t steps = (size - 1) / 2;
  std::vector<PathPoint> path{{0.0, 0.0}};
  double heading = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    heading += intensity * (std::numbers::pi / 2.0) * normal(engine);
    const PathPoint& last = path.back();
    path.push_back({last.x + std::cos(heading), last.y + std::sin(heading)});
  }
  double xmin = path[0].x, xmax = path[0].x, ymin = path[0].y, ymax = path[0].y;
  for (const auto& p : path) {
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  for (auto& p : path) p.x -= cx, p.y -= cy;
  return path;
}

// Rasterizes the motion path with bilinear splatting (8 samples per unit step)
// and normalizes the taps to sum 1.
inline ConvKernel make_motion_kernel(std::uint64_t seed, std::size_t size,
                                     double intensity) {
  const auto path = motion_path(seed, size, intensity);
  Array taps({size, size});
  const double c = static_cast<double>(size / 2);
  auto splat = [&](double x, double y, double w) {
    const double fx = x + c, fy = y + c;
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const double ax = fx - x0, ay = fy - y0;
    const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    const double xs[4] = {x0, x0 + 1, x0, x0 + 1}, ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int q = 0; q < 4; ++q) {
      if (wts[q] == 0.0) continue;
      if (xs[q] < 0 || ys[q] < 0 || xs[q] >= static_cast<double>(size) ||
          ys[q] >= static_cast<double>(size))
        continue;
      taps(static_cast<std::size_t>(ys[q]), static_cast<std::size_t>(xs[q])) += w * wts[q];
    }
  };
  if (path.size() == 1) {
    splat(path[0].x, path[0].y, 1.0);
  } else {
    constexpr int kSamples = 8;
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      for (int j = 0; j < kSamples; ++j) {
        const double f = (j + 0.5) / kSamples;
        splat(path[k].x + f * (path[k + 1].x - path[k].x),
              path[k].y + f * (path[k + 1].y - path[k].y), 1.0);
      }
  }
  return normalized(std::move(taps));
}

}  // namespace latino
