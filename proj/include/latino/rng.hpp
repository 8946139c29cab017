#pragma once

#include <cstdint>
#include <random>

#include "latino/tensor.hpp"

namespace latino {

// Seeded source of randomness. One instance per chain; not shared between
// threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next() { return engine_(); }

  Array gaussian_like(const Shape& shape) {
    Array out(shape);
    for (double& v : out.values()) v = gaussian();
    return out;
  }

  Array uniform_like(const Shape& shape) {
    Array out(shape);
    for (double& v : out.values()) v = uniform();
    return out;
  }

  // Derives an independent seed, e.g. for a per-chain generator.
  std::uint64_t fork_seed() { return engine_() ^ 0x9e3779b97f4a7c15ULL; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace latino
