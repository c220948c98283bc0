#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ddfe/random.hpp"
#include "ddfe/tensor.hpp"
#include "oracles.hpp"

using namespace ddfe;

namespace {

double dist(const Mat& a, const Mat& b) { return norm(a - b); }

}  // namespace

TEST(Tensor, DotExamples) {
  EXPECT_EQ(dot(Mat::identity(2), Mat::identity(2)), 2.0);
  EXPECT_EQ(dot(Mat{1, 2, 3, 4}, Mat(2)), 0.0);
  EXPECT_EQ(dot(Mat::unit(2, 0, 0), Mat::unit(2, 1, 1)), 0.0);
  EXPECT_THROW(dot(Mat(2), Mat(3)), std::invalid_argument);
}

TEST(Tensor, CofactorExamples) {
  EXPECT_EQ(cof(Mat::identity(2)), Mat::identity(2));
  EXPECT_EQ(cof(Mat::diag({2, 3})), Mat::diag({3, 2}));
  EXPECT_EQ(cof(Mat::diag({1, 2, 3})), Mat::diag({6, 3, 2}));
}

TEST(Tensor, DeterminantAndCofactorMatchMinorExpansion) {
  Rng rng(11);
  for (int n : {2, 3})
    for (int k = 0; k < 200; ++k) {
      const Mat a = rng.normal_mat(n);
      EXPECT_NEAR(det(a), oracle::det(a), 1e-13 * (1 + std::pow(norm(a), n)));
      EXPECT_LT(dist(cof(a), oracle::cof(a)), 1e-13 * (1 + norm_sq(a)));
      // a cof(a)^T = det(a) I
      EXPECT_LT(dist(a * transpose(cof(a)), det(a) * Mat::identity(n)), 1e-12 * (1 + std::pow(norm(a), n)));
      EXPECT_NEAR(dot(a, cof(a)), n * det(a), 1e-12 * (1 + std::pow(norm(a), n)));
    }
}

TEST(Tensor, CofactorIsDerivativeOfDeterminant) {
  Rng rng(12);
  for (int n : {2, 3}) {
    const Mat a = rng.normal_mat(n), h = rng.normal_mat(n);
    const double s = 1e-6;
    const double fd = (det(a + s * h) - det(a - s * h)) / (2 * s);
    EXPECT_NEAR(fd, dot(cof(a), h), 1e-8);
  }
}

TEST(Tensor, DeterminantOfSumIdentity2d) {
  // det(A + B) = det A + cof A . B + det B holds exactly in 2D.
  Rng rng(13);
  for (int k = 0; k < 100; ++k) {
    const Mat a = rng.normal_mat(2), b = rng.normal_mat(2);
    EXPECT_NEAR(det(a + b), det(a) + dot(cof(a), b) + det(b), 1e-12 * (1 + norm_sq(a) + norm_sq(b)));
  }
}

TEST(Tensor, DeterminantOfSumIdentity3d) {
  // det(A + B) = det A + cof A . B + A . cof B + det B in 3D.
  Rng rng(14);
  for (int k = 0; k < 100; ++k) {
    const Mat a = rng.normal_mat(3), b = rng.normal_mat(3);
    const double scale = 1 + std::pow(norm(a) + norm(b), 3);
    EXPECT_NEAR(det(a + b), det(a) + dot(cof(a), b) + dot(a, cof(b)) + det(b), 1e-12 * scale);
  }
}

TEST(Tensor, MinorsExamples) {
  const MinorVector z(Mat(2));
  ASSERT_EQ(z.size(), 5);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(z[k], 0.0);
  const MinorVector i2(Mat::identity(2));
  const double expect2[] = {1, 0, 0, 1, 1};
  for (int k = 0; k < 5; ++k) EXPECT_EQ(i2[k], expect2[k]);
  const MinorVector i3(Mat::identity(3));
  ASSERT_EQ(i3.size(), 19);
  const Mat id = Mat::identity(3);
  for (int k = 0; k < 9; ++k) {
    EXPECT_EQ(i3[k], id[k]);
    EXPECT_EQ(i3[9 + k], id[k]);
  }
  EXPECT_EQ(i3.determinant(), 1.0);
}

TEST(Tensor, MinorsContainCofactorAndDeterminant) {
  Rng rng(15);
  const Mat a = rng.normal_mat(3);
  const MinorVector m(a);
  const Mat c = oracle::cof(a);
  for (int k = 0; k < 9; ++k) {
    EXPECT_EQ(m[k], a[k]);
    EXPECT_NEAR(m[9 + k], c[k], 1e-13);
  }
  EXPECT_NEAR(m.determinant(), oracle::det(a), 1e-13);
}

TEST(Tensor, RotationExamples) {
  EXPECT_LT(dist(rotation2d(0.0), Mat::identity(2)), 1e-15);
  EXPECT_LT(dist(rotation2d(std::numbers::pi / 2), Mat{0, -1, 1, 0}), 1e-15);
  const Mat q = random_rotation(3, 42);
  EXPECT_LT(dist(transpose(q) * q, Mat::identity(3)), 1e-14);
  EXPECT_NEAR(det(q), 1.0, 1e-14);
  EXPECT_EQ(random_rotation(3, 42), q);
}

TEST(Tensor, RandomRotationsAreProper) {
  Rng rng(16);
  for (int n : {2, 3})
    for (int k = 0; k < 100; ++k) {
      const Mat q = rng.rotation(n);
      EXPECT_LT(dist(transpose(q) * q, Mat::identity(n)), 1e-13);
      EXPECT_NEAR(det(q), 1.0, 1e-13);
    }
  const Mat r = rotation3d({0, 0, 1}, 0.3);
  EXPECT_LT(dist(r, Mat{std::cos(0.3), -std::sin(0.3), 0, std::sin(0.3), std::cos(0.3), 0, 0, 0, 1}), 1e-15);
}

TEST(Tensor, PolarRotationPart) {
  EXPECT_LT(dist(polar_rotation_part(Mat::identity(2)), Mat::identity(2)), 1e-14);
  EXPECT_LT(dist(polar_rotation_part(2.0 * Mat::identity(2)), Mat::identity(2)), 1e-14);
  Rng rng(17);
  for (int n : {2, 3})
    for (int k = 0; k < 50; ++k) {
      const Mat q = rng.rotation(n);
      const Mat r = rng.rotation(n);
      const Mat u = transpose(r) * (n == 2 ? Mat::diag({1, 2}) : Mat::diag({1, 2, 3})) * r;
      EXPECT_LT(dist(polar_rotation_part(q * u), q), 1e-12);
    }
  EXPECT_THROW(polar_rotation_part(Mat::diag({1, -1})), std::domain_error);
}

TEST(Tensor, ArithmeticAndSkew) {
  const Mat a{1, 2, 3, 4};
  EXPECT_EQ(a * Mat::identity(2), a);
  EXPECT_EQ(transpose(a), (Mat{1, 3, 2, 4}));
  EXPECT_DOUBLE_EQ(trace(a), 5.0);
  EXPECT_DOUBLE_EQ(norm_sq(a), 30.0);
  EXPECT_DOUBLE_EQ(max_abs(a), 4.0);
  EXPECT_DOUBLE_EQ(skew_norm(a), std::sqrt(2.0));
  EXPECT_TRUE(all_finite(a));
  Mat b = a;
  b(0, 1) = std::nan("");
  EXPECT_FALSE(all_finite(b));
}
