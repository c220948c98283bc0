#pragma once

#include <cstdint>
#include <random>

#include "ddfe/tensor.hpp"

namespace ddfe {

/// Seeded random source used everywhere a sample is drawn.
///
/// All randomness in the library flows through this type so that a
/// (seed, stream) pair fully determines every certificate, data set and
/// solver run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  std::uint64_t index(std::uint64_t size);

  /// Value whose logarithm is uniform in [log lo, log hi].
  double log_uniform(double lo, double hi);

  /// Entries i.i.d. standard normal.
  Mat normal_mat(int n);
  /// Uniformly distributed direction on the unit sphere of R^{n x n}.
  Mat direction(int n);
  /// Random direction rescaled to a norm log-uniform in [lo, hi].
  Mat log_uniform_mat(int n, double lo, double hi);
  /// Haar-distributed rotation.
  Mat rotation(int n);

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ddfe
