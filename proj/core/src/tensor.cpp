#include "ddfe/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ddfe/random.hpp"

namespace ddfe {

namespace {

void check_dim(int n) {
  if (n != 2 && n != 3) throw std::invalid_argument("matrix dimension must be 2 or 3, got " + std::to_string(n));
}

void check_same(const Mat& a, const Mat& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

int dim_from_count(std::size_t count) {
  if (count == 4) return 2;
  if (count == 9) return 3;
  throw std::invalid_argument("expected 4 or 9 row-major entries, got " + std::to_string(count));
}

}  // namespace

Mat::Mat(int n) : n_(n) { check_dim(n); }

Mat::Mat(std::initializer_list<double> row_major) : n_(dim_from_count(row_major.size())) {
  std::copy(row_major.begin(), row_major.end(), a_.begin());
}

Mat::Mat(int n, std::span<const double> row_major) : n_(n) {
  check_dim(n);
  if (row_major.size() != static_cast<std::size_t>(n * n)) {
    throw std::invalid_argument("expected " + std::to_string(n * n) + " entries, got " +
                                std::to_string(row_major.size()));
  }
  std::copy(row_major.begin(), row_major.end(), a_.begin());
}

Mat Mat::identity(int n) {
  Mat m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::diag(std::span<const double> d) {
  Mat m(static_cast<int>(d.size()));
  for (int i = 0; i < m.dim(); ++i) m(i, i) = d[i];
  return m;
}

Mat Mat::diag(std::initializer_list<double> d) { return diag(std::span<const double>(d.begin(), d.size())); }

Mat Mat::unit(int n, int i, int j) {
  Mat m(n);
  m(i, j) = 1.0;
  return m;
}

Mat& Mat::operator+=(const Mat& b) {
  check_same(*this, b);
  for (int k = 0; k < size(); ++k) a_[k] += b.a_[k];
  return *this;
}

Mat& Mat::operator-=(const Mat& b) {
  check_same(*this, b);
  for (int k = 0; k < size(); ++k) a_[k] -= b.a_[k];
  return *this;
}

Mat& Mat::operator*=(double s) noexcept {
  for (int k = 0; k < size(); ++k) a_[k] *= s;
  return *this;
}

Mat& Mat::operator/=(double s) noexcept {
  for (int k = 0; k < size(); ++k) a_[k] /= s;
  return *this;
}

bool operator==(const Mat& a, const Mat& b) noexcept {
  if (a.n_ != b.n_) return false;
  return std::equal(a.a_.begin(), a.a_.begin() + a.size(), b.a_.begin());
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator-(Mat a) noexcept { return a *= -1.0; }
Mat operator*(Mat a, double s) noexcept { return a *= s; }
Mat operator*(double s, Mat a) noexcept { return a *= s; }
Mat operator/(Mat a, double s) noexcept { return a /= s; }

Mat operator*(const Mat& a, const Mat& b) {
  check_same(a, b);
  const int n = a.dim();
  Mat c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

std::ostream& operator<<(std::ostream& os, const Mat& a) {
  os << '[';
  for (int i = 0; i < a.dim(); ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < a.dim(); ++j) os << (j ? ", " : "") << a(i, j);
    os << ']';
  }
  return os << ']';
}

double dot(const Mat& a, const Mat& b) {
  check_same(a, b);
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm_sq(const Mat& a) noexcept {
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) s += a[k] * a[k];
  return s;
}

double norm(const Mat& a) noexcept { return std::sqrt(norm_sq(a)); }

double max_abs(const Mat& a) noexcept {
  double m = 0.0;
  for (int k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k]));
  return m;
}

double trace(const Mat& a) noexcept {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a(i, i);
  return s;
}

double det(const Mat& a) noexcept {
  if (a.dim() == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat transpose(const Mat& a) noexcept {
  Mat t(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) t(i, j) = a(j, i);
  return t;
}

Mat cof(const Mat& a) noexcept {
  if (a.dim() == 2) return Mat{a(1, 1), -a(1, 0), -a(0, 1), a(0, 0)};
  Mat c(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
      const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
      // Cyclic index order absorbs the (-1)^{i+j} sign.
      c(i, j) = a(i1, j1) * a(i2, j2) - a(i1, j2) * a(i2, j1);
    }
  return c;
}

double skew_norm(const Mat& a) noexcept { return norm(a - transpose(a)); }

bool all_finite(const Mat& a) noexcept {
  for (int k = 0; k < a.size(); ++k)
    if (!std::isfinite(a[k])) return false;
  return true;
}

MinorVector::MinorVector(const Mat& g) : n_(g.dim()) {
  int k = 0;
  for (double v : g.data()) v_[k++] = v;
  if (n_ == 3) {
    const Mat c = cof(g);
    for (double v : c.data()) v_[k++] = v;
  }
  v_[k] = det(g);
}

double dot(std::span<const double> a, const MinorVector& m) {
  if (a.size() != static_cast<std::size_t>(m.size())) {
    throw std::invalid_argument("minor pairing needs " + std::to_string(m.size()) + " entries");
  }
  double s = 0.0;
  for (int k = 0; k < m.size(); ++k) s += a[k] * m[k];
  return s;
}

Mat rotation2d(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return Mat{c, -s, s, c};
}

Mat rotation3d(const std::array<double, 3>& axis, double theta) {
  const double r = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (!(r > 0.0)) throw std::invalid_argument("rotation axis must be nonzero");
  const double x = axis[0] / r, y = axis[1] / r, z = axis[2] / r;
  const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
  return Mat{t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
             t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
             t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

Mat random_rotation(int n, std::uint64_t seed) {
  check_dim(n);
  Rng rng(seed);
  return rng.rotation(n);
}

Mat polar_rotation_part(const Mat& a) {
  const double d = det(a);
  if (!(d > 0.0)) throw std::domain_error("polar rotation needs det > 0, got det = " + std::to_string(d));
  if (a.dim() == 2) {
    // In 2D, a + cof a is a positive multiple of the polar rotation of a.
    const double c = a(0, 0) + a(1, 1);
    const double s = a(1, 0) - a(0, 1);
    const double r = std::hypot(c, s);
    return Mat{c / r, -s / r, s / r, c / r};
  }
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = a(i, j);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  Mat out(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = r(i, j);
  return out;
}

}  // namespace ddfe
