#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "pullback/types.hpp"

namespace pullback {

/// Portable seeded random source.
///
/// The engine is the standard 64-bit Mersenne Twister, whose output sequence is
/// fixed by the C++ standard. The distributions are implemented here rather than
/// through <random> because the standard distributions are implementation
/// defined, and datasets and estimator trajectories must reproduce bit for bit
/// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Standard Gumbel(0, 1).
  double gumbel() { return -std::log(-std::log(uniform())); }

  /// Index in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Draw an index from an (unnormalised, nonnegative) weight vector.
  std::size_t categorical(const Vector& probs) {
    const double total = probs.sum();
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      u -= probs[i];
      if (u < 0.0) return static_cast<std::size_t>(i);
    }
    // rounding: fall back to the last index with positive mass
    for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
      if (probs[i] > 0.0) return static_cast<std::size_t>(i);
    return 0;
  }

  Vector gumbel_vector(Eigen::Index n) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = gumbel();
    return g;
  }

  Vector normal_vector(Eigen::Index n) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = normal();
    return g;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pullback
