#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>

namespace ddfe {

/// Dense row-major n x n matrix with n in {2, 3} chosen at run time.
///
/// Holds deformation gradients, stresses, rotations and increments alike.
/// Storage is inline, so copies are cheap and no allocation ever happens.
class Mat {
 public:
  static constexpr int kMaxDim = 3;

  Mat() = default;
  explicit Mat(int n);
  /// Row-major entries; the list length must be 4 or 9.
  Mat(std::initializer_list<double> row_major);
  Mat(int n, std::span<const double> row_major);

  static Mat zeros(int n) { return Mat(n); }
  static Mat identity(int n);
  static Mat diag(std::span<const double> d);
  static Mat diag(std::initializer_list<double> d);
  /// Unit basis matrix e_i (x) e_j.
  static Mat unit(int n, int i, int j);

  int dim() const noexcept { return n_; }
  int size() const noexcept { return n_ * n_; }

  double operator()(int i, int j) const noexcept { return a_[i * n_ + j]; }
  double& operator()(int i, int j) noexcept { return a_[i * n_ + j]; }
  double operator[](int k) const noexcept { return a_[k]; }
  double& operator[](int k) noexcept { return a_[k]; }

  std::span<const double> data() const noexcept { return {a_.data(), static_cast<std::size_t>(size())}; }
  std::span<double> data() noexcept { return {a_.data(), static_cast<std::size_t>(size())}; }

  Mat& operator+=(const Mat& b);
  Mat& operator-=(const Mat& b);
  Mat& operator*=(double s) noexcept;
  Mat& operator/=(double s) noexcept;

  friend bool operator==(const Mat& a, const Mat& b) noexcept;

 private:
  int n_ = 2;
  std::array<double, 9> a_{};
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator-(Mat a) noexcept;
Mat operator*(Mat a, double s) noexcept;
Mat operator*(double s, Mat a) noexcept;
Mat operator/(Mat a, double s) noexcept;
/// Matrix product.
Mat operator*(const Mat& a, const Mat& b);

std::ostream& operator<<(std::ostream& os, const Mat& a);

/// Frobenius inner product a.b = tr(a^T b). Throws on dimension mismatch.
double dot(const Mat& a, const Mat& b);
double norm_sq(const Mat& a) noexcept;
double norm(const Mat& a) noexcept;
double max_abs(const Mat& a) noexcept;
double trace(const Mat& a) noexcept;
double det(const Mat& a) noexcept;
Mat transpose(const Mat& a) noexcept;

/// Cofactor matrix, so that dot(a, cof(a)) == n det(a) and cof = D det.
///
/// In 2D cof [[a,b],[c,d]] = [[d,-c],[-b,a]] and is linear in its argument.
Mat cof(const Mat& a) noexcept;

/// Antisymmetric part norm |a - a^T|.
double skew_norm(const Mat& a) noexcept;

bool all_finite(const Mat& a) noexcept;

/// Vector of all minors of G: (G, det G) in 2D, (G, cof G, det G) in 3D.
class MinorVector {
 public:
  explicit MinorVector(const Mat& g);

  int dim() const noexcept { return n_; }
  /// tau(n): 5 for n = 2, 19 for n = 3.
  int size() const noexcept { return n_ == 2 ? 5 : 19; }
  double operator[](int k) const noexcept { return v_[k]; }
  std::span<const double> values() const noexcept { return {v_.data(), static_cast<std::size_t>(size())}; }
  double determinant() const noexcept { return v_[size() - 1]; }

 private:
  int n_;
  std::array<double, 19> v_{};
};

inline MinorVector minors(const Mat& g) { return MinorVector(g); }

/// Pairing A . M(G) between a dual vector and a minor vector.
double dot(std::span<const double> a, const MinorVector& m);

/// Planar rotation by `theta` radians.
Mat rotation2d(double theta);

/// Rotation about the unit axis `axis` by `theta` (Rodrigues).
Mat rotation3d(const std::array<double, 3>& axis, double theta);

/// Deterministic rotation in SO(n) drawn from the Haar measure.
Mat random_rotation(int n, std::uint64_t seed);

/// Rotation factor R of the polar decomposition a = R U, with U SPD.
/// Throws std::domain_error unless det(a) > 0.
Mat polar_rotation_part(const Mat& a);

/// Relative tolerance scale 1 + |a| used by comparisons at large norms.
inline double tol_scale(const Mat& a) noexcept { return 1.0 + norm(a); }

}  // namespace ddfe
