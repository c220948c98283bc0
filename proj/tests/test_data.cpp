#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ddfe/kdtree.hpp"
#include "ddfe/material_data.hpp"
#include "ddfe/random.hpp"

using namespace ddfe;

namespace {

const EnergyModel kHat2 = EnergyModel::hat_w2(0.25, 0.4);

// Brute-force minimum of the deviation over a point list.
std::pair<double, std::size_t> linear_scan(const std::vector<PhasePoint>& pts, const DeviationPair& dev,
                                           const PhasePoint& z) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v = dev.deviation(z, pts[i]);
    if (v < best) {
      best = v;
      arg = i;
    }
  }
  return {best, arg};
}

}  // namespace

TEST(Deviation, ConjugacyOnRadialGrid) {
  Rng rng(31);
  for (const DeviationPair& dev : {DeviationPair::quadratic(1.0), DeviationPair::quadratic(3.5),
                                   DeviationPair::power(4.0), DeviationPair::power(1.5)}) {
    for (int k = 0; k < 20; ++k) {
      const Mat eta = rng.log_uniform_mat(2, 1e-1, 1e1);
      // The sup of xi.eta - V(xi) is attained along eta; maximize over the radius.
      const Mat dir = eta / norm(eta);
      double lo = 0.0, hi = 1.0;
      auto phi = [&](double r) { return r * norm(eta) - dev.V(r * dir); };
      while (phi(2 * hi) > phi(hi)) hi *= 2;
      hi *= 2;
      for (int it = 0; it < 300; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        (phi(m1) < phi(m2) ? lo : hi) = phi(m1) < phi(m2) ? m1 : m2;
      }
      const double sup = phi(0.5 * (lo + hi));
      EXPECT_NEAR(sup, dev.V_star(eta), 1e-8 * (1 + std::abs(sup)));
      // Fenchel-Young at a random xi.
      const Mat xi = rng.normal_mat(2);
      EXPECT_GE(dev.V(xi) + dev.V_star(eta) - dot(xi, eta), -1e-12);
    }
  }
}

TEST(Deviation, LowerBoundsConvexityAndGradients) {
  Rng rng(32);
  for (const DeviationPair& dev : {DeviationPair::quadratic(2.0), DeviationPair::power(3.0)}) {
    EXPECT_EQ(dev.V(Mat(2)), 0.0);
    EXPECT_EQ(dev.V_star(Mat(2)), 0.0);
    for (int k = 0; k < 200; ++k) {
      const Mat a = rng.log_uniform_mat(2, 1e-3, 1e3), b = rng.log_uniform_mat(2, 1e-3, 1e3);
      EXPECT_GE(dev.V(a), dev.c_p() * std::pow(norm(a), dev.p()) * (1 - 1e-12));
      EXPECT_GE(dev.V_star(a), dev.c_q() * std::pow(norm(a), dev.q()) * (1 - 1e-12));
      EXPECT_LE(dev.V(0.5 * (a + b)), 0.5 * (dev.V(a) + dev.V(b)) * (1 + 1e-12));
      EXPECT_LE(dev.V_star(0.5 * (a + b)), 0.5 * (dev.V_star(a) + dev.V_star(b)) * (1 + 1e-12));
    }
    const Mat x = rng.normal_mat(2), h = rng.direction(2);
    const double s = 1e-6;
    EXPECT_NEAR((dev.V(x + s * h) - dev.V(x - s * h)) / (2 * s), dot(dev.grad_V(x), h), 1e-7);
    EXPECT_NEAR((dev.V_star(x + s * h) - dev.V_star(x - s * h)) / (2 * s), dot(dev.grad_V_star(x), h), 1e-7);
  }
  EXPECT_THROW(DeviationPair::quadratic(0.0), std::invalid_argument);
  EXPECT_THROW(DeviationPair::power(1.0), std::invalid_argument);
}

TEST(Psi, Examples) {
  const auto dev = DeviationPair::quadratic(1.0);
  const auto single = LocalDataSet::cloud(2, {{Mat(2), Mat(2)}});
  const PsiResult r = psi(single, dev, {Mat::identity(2), Mat(2)});
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.argmin, (PhasePoint{Mat(2), Mat(2)}));

  const Mat i = Mat::identity(2);
  const auto two = LocalDataSet::cloud(2, {{i, Mat(2)}, {2.0 * i, i}});
  const PsiResult s = psi(two, dev, {1.4 * i, 0.4 * i});
  EXPECT_NEAR(s.value, 0.32, 1e-14);
  EXPECT_EQ(s.index, 0u);
  EXPECT_EQ(s.argmin, (PhasePoint{i, Mat(2)}));

  const PsiResult member = psi(two, dev, {2.0 * i, i});
  EXPECT_EQ(member.value, 0.0);
  EXPECT_EQ(member.index, 1u);
}

TEST(Psi, GraphMembershipIsZero) {
  const auto g = LocalDataSet::graph(kHat2);
  Rng rng(33);
  for (int k = 0; k < 20; ++k) {
    const Mat f = Mat::identity(2) + 0.2 * rng.normal_mat(2);
    const PsiResult r = psi(g, DeviationPair::quadratic(1.0), {f, stress(kHat2, f)});
    EXPECT_LT(r.value, 1e-14);
    EXPECT_FALSE(r.certified);
  }
}

TEST(Psi, GraphSearchIsStationary) {
  // At the returned F' the derivative of V(F - F') + V*(P - T(F')) vanishes.
  const auto g = LocalDataSet::graph(kHat2);
  const auto dev = DeviationPair::quadratic(1.0);
  Rng rng(34);
  for (int k = 0; k < 10; ++k) {
    const PhasePoint z{Mat::identity(2) + 0.2 * rng.normal_mat(2), 0.3 * rng.normal_mat(2)};
    const PsiResult r = psi(g, dev, z);
    auto obj = [&](const Mat& f) { return dev.deviation(z, {f, stress(kHat2, f)}); };
    for (int c = 0; c < 4; ++c) {
      const Mat e = Mat::unit(2, c / 2, c % 2);
      const double s = 1e-6;
      EXPECT_NEAR((obj(r.argmin.F + s * e) - obj(r.argmin.F - s * e)) / (2 * s), 0.0, 1e-6);
    }
    EXPECT_NEAR(r.value, obj(r.argmin.F), 1e-14);
  }
}

TEST(Nearest, MatchesLinearScan) {
  Rng rng(35);
  std::vector<PhasePoint> pts;
  for (int k = 0; k < 1000; ++k) pts.push_back({rng.normal_mat(2), rng.normal_mat(2)});
  // Duplicates exercise the lowest-index tie rule.
  pts.push_back(pts[17]);
  pts.push_back(pts[400]);
  const auto d = LocalDataSet::cloud(2, pts);
  for (double c : {1.0, 0.3, 7.0}) {
    const auto dev = DeviationPair::quadratic(c);
    for (int q = 0; q < 100; ++q) {
      const PhasePoint z = q % 10 == 0 ? pts[q] : PhasePoint{rng.normal_mat(2), rng.normal_mat(2)};
      const auto [best, arg] = linear_scan(pts, dev, z);
      const PsiResult r = nearest(d, dev, z);
      EXPECT_EQ(r.index, arg);
      EXPECT_NEAR(r.value, best, 1e-12 * (1 + best));
      if (q % 10 == 0) EXPECT_EQ(r.value, 0.0);
    }
  }
  const auto single = LocalDataSet::cloud(2, {pts[3]});
  EXPECT_EQ(nearest(single, DeviationPair::quadratic(1.0), pts[9]).argmin, pts[3]);
}

TEST(Nearest, PowerDeviationFallsBackToScan) {
  Rng rng(36);
  std::vector<PhasePoint> pts;
  for (int k = 0; k < 200; ++k) pts.push_back({rng.normal_mat(2), rng.normal_mat(2)});
  const auto d = LocalDataSet::cloud(2, pts);
  const auto dev = DeviationPair::power(4.0);
  for (int q = 0; q < 20; ++q) {
    const PhasePoint z{rng.normal_mat(2), rng.normal_mat(2)};
    EXPECT_EQ(nearest(d, dev, z).index, linear_scan(pts, dev, z).second);
  }
}

TEST(KdTree, AgreesWithScanInSeveralDimensions) {
  Rng rng(37);
  for (std::size_t k : {1u, 3u, 8u, 18u}) {
    std::vector<double> coords;
    for (int i = 0; i < 500 * static_cast<int>(k); ++i) coords.push_back(std::round(rng.normal() * 4) / 4);
    const KdTree tree(coords, k, 4);
    for (int q = 0; q < 100; ++q) {
      std::vector<double> query(k);
      for (auto& v : query) v = std::round(rng.normal() * 4) / 4;
      const auto a = tree.nearest(query), b = tree.nearest_linear(query);
      EXPECT_EQ(a.index, b.index);
      EXPECT_EQ(a.dist_sq, b.dist_sq);
    }
  }
}

TEST(Sampling, NoiselessPointsLieOnTheGraph) {
  const auto one = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.0), 1, 0.0, 1, false);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.point(0).F, Mat::identity(2));
  EXPECT_LT(norm(one.point(0).P), 1e-14);

  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 500, 0.0, 2, true);
  const auto g = LocalDataSet::graph(kHat2);
  for (const auto& z : d.points()) {
    EXPECT_GT(det(z.F), 0.0);
    EXPECT_LT(psi(g, DeviationPair::quadratic(1.0), z).value, 1e-20);
  }
}

TEST(Sampling, NoiseStatistics) {
  const auto box = SamplingBox::around(Mat::identity(2), 0.5);
  const auto clean = sample_graph(kHat2, box, 10000, 0.0, 3, false);
  const auto noisy = sample_graph(kHat2, box, 10000, 0.01, 3, false);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ASSERT_EQ(clean.point(i).F, noisy.point(i).F);
    const double rel = norm(noisy.point(i).P - clean.point(i).P) / norm(clean.point(i).P);
    sum += rel;
    sum_sq += rel * rel;
  }
  // RMS relative perturbation is the noise level; the mean of a 4D Gaussian norm is ~0.94 of its RMS.
  EXPECT_NEAR(std::sqrt(sum_sq / 10000), 0.01, 0.0005);
  EXPECT_NEAR(sum / 10000, 0.01, 0.001);
}

TEST(Sampling, DeterministicAndNested) {
  const auto box = SamplingBox::around(Mat::identity(2), 0.4);
  const auto a = sample_graph(kHat2, box, 300, 0.02, 9, true);
  const auto b = sample_graph(kHat2, box, 300, 0.02, 9, true);
  const auto c = sample_graph(kHat2, box, 100, 0.02, 9, true);
  EXPECT_EQ(a.points(), b.points());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.point(i), a.point(i));
  EXPECT_THROW(sample_graph(kHat2, box, 0, 0.0, 1, false), std::invalid_argument);
  EXPECT_THROW(sample_graph(kHat2, SamplingBox::around(Mat::diag({-1, 1}), 0.1), 1, 0.0, 1, true),
               std::invalid_argument);
}

TEST(MomentFilter, RemovesOnlyUnbalancedPoints) {
  const auto clean = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.4), 400, 0.0, 4, false);
  EXPECT_EQ(filter_moment_equilibrium(clean, 1e-10).size(), clean.size());

  auto pts = clean.points();
  pts.push_back({Mat::identity(2), Mat::unit(2, 0, 1)});
  const auto filtered = filter_moment_equilibrium(LocalDataSet::cloud(2, pts), 1e-10);
  EXPECT_EQ(filtered.size(), clean.size());
  EXPECT_EQ(filtered.metadata().moment_filter_removed, 1u);

  const auto noisy = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.4), 400, 0.05, 4, false);
  const auto f1 = filter_moment_equilibrium(noisy, 1e-3), f2 = filter_moment_equilibrium(noisy, 1e-3);
  EXPECT_EQ(f1.points(), f2.points());
  std::size_t kept = 0;
  for (const auto& z : noisy.points())
    if (moment_residual(z) <= 1e-3 * (1 + norm(z.F) * norm(z.P))) ++kept;
  EXPECT_EQ(f1.size(), kept);
  EXPECT_EQ(f1.metadata().moment_filter_removed, noisy.size() - kept);
  for (const auto& z : f1.points()) EXPECT_LE(moment_residual(z), 1e-3 * (1 + norm(z.F) * norm(z.P)));
}

TEST(Augment, OrbitCopies) {
  const Mat i = Mat::identity(2);
  const auto base = LocalDataSet::cloud(2, {{i, Mat(2)}, {2.0 * i, i}});
  EXPECT_EQ(augment_orbit(base, 1).points(), base.points());
  const auto aug = augment_orbit(base, 4);
  ASSERT_EQ(aug.size(), 8u);
  bool found = false;
  for (const auto& z : aug.points())
    if (norm(z.F - rotation2d(std::numbers::pi / 2)) < 1e-15 && norm(z.P) == 0.0) found = true;
  EXPECT_TRUE(found);
  EXPECT_EQ(aug.metadata().m_rot, 4);

  for (int n : {2, 3}) {
    const auto qs = orbit_rotations(n, 16);
    ASSERT_EQ(qs.size(), 16u);
    EXPECT_EQ(qs[0], Mat::identity(n));
    for (const Mat& q : qs) {
      EXPECT_LT(norm(transpose(q) * q - Mat::identity(n)), 1e-13);
      EXPECT_NEAR(det(q), 1.0, 1e-13);
    }
  }
}

TEST(DataSet, Validation) {
  EXPECT_THROW(LocalDataSet::cloud(2, {{Mat(3), Mat(3)}}), std::invalid_argument);
  PhasePoint bad{Mat(2), Mat(2)};
  bad.P(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(LocalDataSet::cloud(2, {bad}), std::invalid_argument);
  EXPECT_TRUE(LocalDataSet::cloud(2, {}).empty());
  EXPECT_THROW(LocalDataSet::cloud(2, {}).stress(), std::logic_error);
}
