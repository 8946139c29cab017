#pragma once

// Independent reference computations for the unit and acceptance tests. Only
// brute-force evaluation and dense linear algebra live here; none of it calls
// back into the library's fast paths.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "latino/tensor.hpp"

namespace oracle {

using latino::Array;
using latino::Shape;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Vec to_vec(const Array& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
  return v;
}

inline Array from_vec(const Vec& v, const Shape& shape) {
  Array a(shape);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = v[static_cast<Eigen::Index>(i)];
  return a;
}

// Dense matrix of a linear map, assembled column by column from basis vectors.
inline Mat dense(const std::function<Array(const Array&)>& f, const Shape& domain) {
  const std::size_t n = latino::shape_size(domain);
  Mat M;
  for (std::size_t j = 0; j < n; ++j) {
    Array e(domain);
    e[j] = 1.0;
    const Vec col = to_vec(f(e));
    if (j == 0) M.resize(col.size(), static_cast<Eigen::Index>(n));
    M.col(static_cast<Eigen::Index>(j)) = col;
  }
  return M;
}

// O(n^2) 2-D DFT, X[k,l] = sum x[m,n] exp(-2 pi i (km/H + ln/W)).
inline std::vector<std::complex<double>> naive_dft(const Array& plane2d, std::size_t H,
                                                   std::size_t W) {
  std::vector<std::complex<double>> out(H * W);
  for (std::size_t k = 0; k < H; ++k)
    for (std::size_t l = 0; l < W; ++l) {
      std::complex<double> acc;
      for (std::size_t m = 0; m < H; ++m)
        for (std::size_t n = 0; n < W; ++n) {
          const double ph = -2.0 * std::numbers::pi *
                            (static_cast<double>(k * m) / static_cast<double>(H) +
                             static_cast<double>(l * n) / static_cast<double>(W));
          acc += plane2d[m * W + n] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
      out[k * W + l] = acc;
    }
  return out;
}

inline double rel_err(const Array& a, const Array& b) {
  const double d = latino::norm(b);
  return latino::distance(a, b) / (d > 0.0 ? d : 1.0);
}

inline double rel_err(const Vec& a, const Vec& b) {
  const double d = b.norm();
  return (a - b).norm() / (d > 0.0 ? d : 1.0);
}

// Central finite-difference gradient of a scalar function.
inline Array fd_gradient(const std::function<double(const Array&)>& f, const Array& x,
                         double h) {
  Array g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Array p = x, m = x;
    p[i] += h;
    m[i] -= h;
    g[i] = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
