#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ddfe/certificates.hpp"
#include "ddfe/material_data.hpp"
#include "ddfe/random.hpp"
#include "oracles.hpp"

using namespace ddfe;

namespace {

const EnergyModel kHat2 = EnergyModel::hat_w2(0.25, 0.4);
const EnergyModel kHat3 = EnergyModel::hat_w3(1.0, 1.0, 0.5);
const StressFunction kNegative{2, [](const Mat& x) { return -x; }};

}  // namespace

TEST(Certificates, StringConversions) {
  for (Property p : {Property::kCoercivity, Property::kPolymonotone2d, Property::kPolymonotone3d,
                     Property::kQuasimonotone, Property::kGrowth, Property::kFrameIndifference,
                     Property::kMomentEquilibrium})
    EXPECT_EQ(property_from_string(to_string(p)), p);
  EXPECT_EQ(verdict_from_string("violated"), Verdict::kViolated);
  EXPECT_THROW(property_from_string("ellipticity"), std::invalid_argument);
}

TEST(Certificates, ViolationTolerance) {
  EXPECT_FALSE(is_violation(0.0, 1.0, 1.0));
  EXPECT_FALSE(is_violation(-1e-11, 1.0, 1.0));
  EXPECT_TRUE(is_violation(-1e-6, 1.0, 1.0));
  EXPECT_TRUE(is_violation(std::nan(""), 1.0, 1.0));
}

TEST(Coercivity, HatW2HoldsWithQuarticExponent) {
  const Certificate c = check_coercivity(stress_function(kHat2), 4.0, 100000, 1);
  EXPECT_EQ(c.verdict, Verdict::kNoViolationFound);
  EXPECT_FALSE(c.witness);
  EXPECT_EQ(c.samples_tested, 100000u);
  EXPECT_GT(c.min_margin, 0.0);
  EXPECT_GT(c.constants_used.at("c_F"), 0.0);
  EXPECT_NEAR(c.constants_used.at("q"), 4.0 / 3.0, 1e-15);
}

TEST(Coercivity, HatW3HoldsWithSexticExponent) {
  const Certificate c = check_coercivity(stress_function(kHat3), 6.0, 50000, 2);
  EXPECT_EQ(c.verdict, Verdict::kNoViolationFound);
}

TEST(Coercivity, NegativeStressIsViolatedWithReproducibleWitness) {
  const Certificate c = check_coercivity(kNegative, 2.0, 1000, 3);
  ASSERT_EQ(c.verdict, Verdict::kViolated);
  ASSERT_TRUE(c.witness);
  const Mat& xi = c.witness->matrix("xi");
  // xi.T(xi) = -|xi|^2 < 0 at the witness, independently of the fitted constants.
  EXPECT_LT(dot(xi, kNegative(xi)), 0.0);
  const CoercivityConstants k{1.0 / c.constants_used.at("c_F"), 1.0 / c.constants_used.at("c_P"),
                              c.constants_used.at("c")};
  const Witness again = coercivity_margin(kNegative, 2.0, k, xi);
  EXPECT_NEAR(again.margin, c.witness->margin, 1e-12 * (1 + std::abs(c.witness->margin)));
  EXPECT_TRUE(is_violation(again.margin, again.lhs, again.rhs));
  EXPECT_LT(c.min_margin, 0.0);
}

TEST(Coercivity, Deterministic) {
  const Certificate a = check_coercivity(stress_function(kHat2), 4.0, 20000, 7);
  const Certificate b = check_coercivity(stress_function(kHat2), 4.0, 20000, 7);
  EXPECT_EQ(a, b);
  const Certificate c = check_coercivity(kNegative, 2.0, 5000, 7);
  EXPECT_EQ(c, check_coercivity(kNegative, 2.0, 5000, 7));
  EXPECT_THROW(check_coercivity(kNegative, 1.0, 10, 1), std::invalid_argument);
}

TEST(Polymonotone2d, HoldsInsideTheHypotheses) {
  const Certificate c = check_polymonotone_2d(kHat2, 100000, 4);
  EXPECT_EQ(c.verdict, Verdict::kNoViolationFound);
  EXPECT_EQ(c.labels.at("hypotheses_b_le_2_d_le_3a"), "true");
  EXPECT_NEAR(c.constants_used.at("b"), 1.9, 1e-14);
}

TEST(Polymonotone2d, ZeroIncrementHasZeroMargin) {
  Rng rng(41);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(polymonotone_2d_margin(kHat2, rng.normal_mat(2), Mat(2)).margin, 0.0);
}

TEST(Polymonotone2d, MarginMatchesScalarEvaluation) {
  // F = 0, G = I: lhs = T(I).I - T(0).I and rhs = a/4 |I|^4 + g'(0) + (1 - b/2)|I|^2.
  const double a = 0.25, beta = 0.4, t0 = 1 + 1.5 / 0.4, b = beta * t0;
  const Mat i = Mat::identity(2);
  auto t = [&](const Mat& x) {
    const double r2 = oracle::frob_sq(x);
    return x * (1 + a * r2) + beta * (oracle::det(x) - t0) * oracle::cof(x);
  };
  const double lhs = oracle::inner(t(i) - t(Mat(2)), i);
  const double rhs = 0.25 * a * 4.0 + beta * (0.0 - t0) * 1.0 + (1 - b / 2) * 2.0;
  const Witness w = polymonotone_2d_margin(kHat2, Mat(2), i);
  EXPECT_NEAR(w.lhs, lhs, 1e-13);
  EXPECT_NEAR(w.rhs, rhs, 1e-13);
  EXPECT_GE(w.margin, 0.0);
}

TEST(Polymonotone3d, ZeroIncrementAndEmpiricalWindow) {
  Rng rng(42);
  EXPECT_EQ(polymonotone_3d_margin(kHat3, rng.normal_mat(3), Mat(3), 0.1).margin, 0.0);
  const CstarConstants k = estimate_cstar_constants(5, 4000);
  ASSERT_GT(k.c_star, 0.0);
  // beta <= c* e lies inside the estimated window.
  const EnergyModel m = EnergyModel::hat_w3(1.0, 1.0, 0.9 * std::min(3.0, k.c_star));
  const Certificate c = check_polymonotone_3d(m, 50000, 6, k.c_prime);
  EXPECT_EQ(c.verdict, Verdict::kNoViolationFound);
  EXPECT_EQ(c.labels.at("window"), "empirical");
}

TEST(Polymonotone3d, OutsideWindowIsReportedWithWitnessIfViolated) {
  const EnergyModel m = EnergyModel::hat_w3(1.0, 1.0, 10.0);
  const Certificate c = check_polymonotone_3d(m, 20000, 7, 0.01);
  if (c.violated()) {
    ASSERT_TRUE(c.witness);
    const Witness w = polymonotone_3d_margin(m, c.witness->matrix("F"), c.witness->matrix("G"), 0.01);
    EXPECT_TRUE(is_violation(w.margin, w.lhs, w.rhs));
  } else {
    EXPECT_FALSE(c.witness);
  }
}

TEST(Quasimonotone, ZeroFieldGivesZeroSides) {
  TestField phi;
  const Witness w = quasimonotone_margin(stress_function(kHat2), polymonotone_gap(kHat2), Mat::identity(2), phi, 8);
  EXPECT_EQ(w.lhs, 0.0);
  EXPECT_EQ(w.rhs, 0.0);
}

TEST(Quasimonotone, HatW2HoldsAndNegativeLawFails) {
  const Certificate ok = check_quasimonotone(stress_function(kHat2), 2, polymonotone_gap(kHat2), 12, 200, 8);
  EXPECT_EQ(ok.verdict, Verdict::kNoViolationFound);
  const GapFunction b = [](const Mat&, const Mat& g) { return norm_sq(g); };
  const Certificate bad = check_quasimonotone(kNegative, 2, b, 12, 50, 8);
  ASSERT_EQ(bad.verdict, Verdict::kViolated);
  ASSERT_TRUE(bad.witness);
  const TestField phi = TestField::decode(2, bad.witness->param("phi"));
  const Witness again = quasimonotone_margin(kNegative, b, bad.witness->matrix("F"), phi, 12);
  EXPECT_NEAR(again.margin, bad.witness->margin, 1e-12 * (1 + std::abs(again.margin)));
  EXPECT_LT(again.lhs, 0.0);
}

TEST(Quasimonotone, FieldEncodingRoundTripsAndSupportIsCompact) {
  Rng rng(43);
  for (int n : {2, 3}) {
    const TestField phi = TestField::random(n, rng);
    const TestField back = TestField::decode(n, phi.encode());
    EXPECT_EQ(back.encode(), phi.encode());
    const double x[3] = {0.45, 0.52, 0.48};
    const Mat g = phi.gradient(x);
    EXPECT_TRUE(all_finite(g));
    const double outside[3] = {0.02, 0.5, 0.5};
    EXPECT_EQ(norm(phi.gradient(outside)), 0.0);
  }
}

TEST(Growth, RatioAndVerdicts) {
  EXPECT_EQ(growth_ratio(stress_function(kHat2), 4.0, Mat::identity(2), Mat(2)), 0.0);
  const Certificate ok = check_growth(stress_function(kHat2), 4.0, 20000, 9);
  EXPECT_EQ(ok.verdict, Verdict::kNoViolationFound);
  EXPECT_TRUE(std::isfinite(ok.constants_used.at("c")));
  EXPECT_GT(ok.constants_used.at("c"), 0.0);
  const StressFunction expo{2, [](const Mat& x) { return std::exp(norm(x)) * x; }};
  const Certificate bad = check_growth(expo, 4.0, 20000, 9);
  EXPECT_EQ(bad.verdict, Verdict::kViolated);
  ASSERT_TRUE(bad.witness);
}

TEST(FrameIndifference, GraphAndClouds) {
  EXPECT_EQ(check_frame_indifference(LocalDataSet::graph(kHat2), 5000, 10).verdict, Verdict::kNoViolationFound);
  const auto single = LocalDataSet::cloud(2, {{Mat::unit(2, 0, 0), Mat(2)}});
  const Certificate c = check_frame_indifference(single, 100, 10);
  EXPECT_EQ(c.verdict, Verdict::kViolated);
  const Witness w = frame_gap_margin(single, {Mat::unit(2, 0, 0), Mat(2)}, rotation2d(std::numbers::pi / 2));
  EXPECT_TRUE(is_violation(w.margin, w.lhs, w.rhs));

  const auto base = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 50, 0.0, 11, true);
  const auto aug = augment_orbit(base, 32);
  EXPECT_NEAR(aug.metadata().orbit_gap_angle, std::numbers::pi / 32, 1e-12);
  EXPECT_EQ(check_frame_indifference(base, 500, 12).verdict, Verdict::kViolated);
  EXPECT_EQ(check_frame_indifference(aug, 500, 12).verdict, Verdict::kNoViolationFound);
}

TEST(MomentEquilibrium, Examples) {
  EXPECT_FALSE(is_violation(moment_margin({Mat::identity(2), Mat::identity(2)}).margin, 0, 0));
  const Witness w = moment_margin({Mat::identity(2), Mat::unit(2, 0, 1)});
  EXPECT_TRUE(is_violation(w.margin, w.lhs, w.rhs));
  EXPECT_EQ(check_moment_equilibrium(LocalDataSet::graph(kHat3), 5000, 13).verdict, Verdict::kNoViolationFound);
  const auto bad = LocalDataSet::cloud(2, {{Mat::identity(2), Mat::identity(2)}, {Mat::identity(2), Mat::unit(2, 0, 1)}});
  const Certificate c = check_moment_equilibrium(bad, 10, 13);
  EXPECT_EQ(c.verdict, Verdict::kViolated);
  EXPECT_EQ(c.labels.at("coverage"), "every stored point");
  EXPECT_EQ(c.witness->matrix("P"), Mat::unit(2, 0, 1));
}

TEST(CstarConstants, LimitsAndPositivity) {
  Rng rng(44);
  const Mat g = rng.direction(3);
  EXPECT_NEAR(w_six_monotonicity_gap(Mat(3), g), 1.0, 1e-14);
  EXPECT_NEAR(cstarstar_ratio(Mat(3), g), 1.0, 1e-14);
  // As |G| -> 0 at |F| = 1, E / |G|^2 tends to 4(F.H)^2 + |H|^2 >= 1.
  const Mat f = rng.direction(3), h = rng.direction(3);
  const double s = 1e-5;
  const double limit = 4 * dot(f, h) * dot(f, h) + 1.0;
  EXPECT_NEAR(w_six_monotonicity_gap(f, s * h) / (s * s), limit, 1e-3);
  EXPECT_GE(limit, 1.0);
  const CstarConstants k = estimate_cstar_constants(14, 3000);
  EXPECT_GT(k.c_starstar, 0.0);
  EXPECT_NEAR(k.c_prime, k.c_starstar / 2, 1e-15);
  EXPECT_NEAR(k.c_star, k.c_starstar / (2 * k.C_star), 1e-15);
  EXPECT_EQ(k.seed, 14u);
}
