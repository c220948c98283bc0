#include "ddfe/random.hpp"

#include <cmath>
#include <numbers>

namespace ddfe {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

std::uint64_t Rng::index(std::uint64_t size) {
  std::uniform_int_distribution<std::uint64_t> dist(0, size - 1);
  return dist(engine_);
}

double Rng::log_uniform(double lo, double hi) {
  return std::exp(uniform(std::log(lo), std::log(hi)));
}

Mat Rng::normal_mat(int n) {
  Mat m(n);
  for (int k = 0; k < m.size(); ++k) m[k] = normal();
  return m;
}

Mat Rng::direction(int n) {
  for (;;) {
    Mat m = normal_mat(n);
    const double r = norm(m);
    if (r > 1e-12) return m / r;
  }
}

Mat Rng::log_uniform_mat(int n, double lo, double hi) {
  return direction(n) * log_uniform(lo, hi);
}

Mat Rng::rotation(int n) {
  if (n == 2) return rotation2d(uniform(0.0, 2.0 * std::numbers::pi));
  // Unit quaternion with Gaussian components is Haar on SO(3).
  double q[4];
  double r = 0.0;
  do {
    r = 0.0;
    for (double& v : q) {
      v = normal();
      r += v * v;
    }
  } while (r < 1e-24);
  r = std::sqrt(r);
  const double w = q[0] / r, x = q[1] / r, y = q[2] / r, z = q[3] / r;
  return Mat{1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
             2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
             2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

}  // namespace ddfe
