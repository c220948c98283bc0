#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddfe/dd_solver.hpp"
#include "ddfe/random.hpp"
#include "oracles.hpp"

using namespace ddfe;

namespace {

const EnergyModel kHat2 = EnergyModel::hat_w2(0.25, 0.4);

MeshProblem stretch_problem(int n = 8) {
  return MeshProblem(square_mesh(n, {Side::kLeft, Side::kRight}), uniaxial_stretch(0.04));
}

Mesh two_triangles() {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.dirichlet_edges = {{3, 0}};
  m.neumann_edges = {{0, 1}, {1, 2}, {2, 3}};
  return m;
}

bool non_increasing(const std::vector<double>& j) { return std::is_sorted(j.rbegin(), j.rend()); }

}  // namespace

TEST(Classify, Rules) {
  SolveReport r;
  r.J_history = {1.0, 0.0};
  EXPECT_EQ(classify_solution(r, 1e-10), Classification::kStrong);
  r.J_history = {1.0, 0.5};
  r.stagnated = true;
  EXPECT_EQ(classify_solution(r, 1e-10), Classification::kGeneralized);
  r.stagnated = false;
  EXPECT_EQ(classify_solution(r, 1e-10), Classification::kNonConverged);
  EXPECT_EQ(classification_from_string(to_string(Classification::kGeneralized)), Classification::kGeneralized);
  EXPECT_EQ(init_from_string("zero-state"), Init::kZeroState);
  EXPECT_THROW(init_from_string("warm"), std::invalid_argument);
}

TEST(SolveDD, RecoversClassicalSolutionFromExactStates) {
  const MeshProblem mp = stretch_problem();
  const ClassicalSolution cl = solve_classical(mp, kHat2);
  std::vector<PhasePoint> pts;
  for (std::size_t e = 0; e < mp.element_count(); ++e) pts.push_back({cl.fields.F[e], cl.fields.P[e]});
  // Padding with unrelated graph samples must not disturb the exact match.
  const auto extra = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.2), 500, 0.0, 3, true);
  pts.insert(pts.end(), extra.points().begin(), extra.points().end());
  DataSetMetadata meta;
  meta.model = kHat2;
  const auto d = LocalDataSet::cloud(2, pts, meta);

  DDConfig cfg;
  cfg.init = Init::kClassicalWarmStart;
  const SolveReport r = solve_dd(mp, d, cfg);
  EXPECT_EQ(r.classification, Classification::kStrong);
  EXPECT_LE(r.J_history.front(), r.tol_J);
  std::vector<Vec2> diff(cl.fields.u.size());
  for (std::size_t k = 0; k < diff.size(); ++k)
    diff[k] = {r.fields.u[k][0] - cl.fields.u[k][0], r.fields.u[k][1] - cl.fields.u[k][1]};
  EXPECT_LE(l2_norm(mp, diff), 1e-8 * l2_norm(mp, cl.fields.u));
  // Mirror-symmetric elements hold states equal up to roundoff, so either copy is an exact match.
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    EXPECT_LT(norm(pts[r.assignment[e]].F - pts[e].F), 1e-12);
    EXPECT_LT(norm(pts[r.assignment[e]].P - pts[e].P), 1e-12);
  }
}

TEST(SolveDD, SingletonAtOriginConvergesImmediately) {
  const MeshProblem mp(square_mesh(4, {Side::kLeft}), affine_dirichlet(Mat(2)));
  const auto d = LocalDataSet::cloud(2, {{Mat(2), Mat(2)}});
  const SolveReport r = solve_dd(mp, d, {});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.stagnated);
  EXPECT_EQ(r.final_J(), 0.0);
  EXPECT_EQ(r.classification, Classification::kStrong);
  for (const Vec2& u : r.fields.u) EXPECT_EQ(std::hypot(u[0], u[1]), 0.0);
  for (const Mat& p : r.fields.P) EXPECT_EQ(norm(p), 0.0);
}

TEST(SolveDD, IncompatibleSingletonIsGeneralized) {
  const MeshProblem mp(two_triangles(), affine_dirichlet(Mat(2)));
  const Mat f = Mat::unit(2, 0, 0) + Mat::identity(2);
  const auto d = LocalDataSet::cloud(2, {{f, Mat(2)}});
  DDConfig cfg;
  cfg.dev = DeviationPair::quadratic(2.0);
  const SolveReport r = solve_dd(mp, d, cfg);
  EXPECT_EQ(r.classification, Classification::kGeneralized);
  EXPECT_GT(r.final_J(), 0.0);

  // Closed form: J = sum_e w_e C/2 |Du_e - F|^2 with u from the dense oracle and P = 0.
  const Eigen::VectorXd u = oracle::compatible_projection(mp, {f, f}, 2.0);
  const oracle::DenseMesh dm = oracle::dense(mp);
  const Eigen::VectorXd grad = dm.G * u;
  double j = 0.0;
  for (int e = 0; e < 2; ++e) {
    Mat du(2);
    for (int k = 0; k < 4; ++k) du[k] = grad(4 * e + k);
    j += dm.w[e] * 1.0 * oracle::frob_sq(du - f);
  }
  EXPECT_NEAR(r.final_J(), j, 1e-12 * (1 + j));
}

TEST(SolveDD, SingleIterationCapIsNonConverged) {
  const MeshProblem mp = stretch_problem(4);
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 200, 0.0, 5, true);
  DDConfig cfg;
  cfg.max_outer = 1;
  cfg.init = Init::kRandomDataAssignment;
  cfg.seed = 4;
  const SolveReport r = solve_dd(mp, d, cfg);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_FALSE(r.stagnated);
  EXPECT_EQ(r.classification, Classification::kNonConverged);
}

TEST(SolveDD, ObjectiveNeverIncreases) {
  const MeshProblem mp = stretch_problem(6);
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 2000, 0.02, 6, true);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (Init init : {Init::kRandomDataAssignment, Init::kZeroState, Init::kClassicalWarmStart}) {
      DDConfig cfg;
      cfg.seed = seed;
      cfg.init = init;
      const SolveReport r = solve_dd(mp, d, cfg);
      EXPECT_TRUE(non_increasing(r.J_history)) << to_string(init) << " seed " << seed;
      EXPECT_TRUE(r.defects.empty());
      EXPECT_NE(r.classification, Classification::kNonConverged);
    }
  }
}

TEST(SolveDD, DeterministicForFixedSeed) {
  const MeshProblem mp = stretch_problem(6);
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 1000, 0.01, 7, true);
  DDConfig cfg;
  cfg.seed = 42;
  cfg.init = Init::kRandomDataAssignment;
  const SolveReport a = solve_dd(mp, d, cfg), b = solve_dd(mp, d, cfg);
  EXPECT_EQ(a.J_history, b.J_history);
  EXPECT_EQ(a.fields, b.fields);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.diagnostics, b.diagnostics);
}

TEST(SolveDD, DenserDataFitsBetter) {
  const MeshProblem mp = stretch_problem(8);
  const StudyTable t = study_convergence(mp, kHat2, {1000, 10000}, 0.0, 1);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_LT(t.rows[1].J, t.rows[0].J);
  for (const StudyRow& row : t.rows) EXPECT_TRUE(row.J_monotone);
}

TEST(SolveDD, GraphDataSetRecoversClassicalSolution) {
  const MeshProblem mp = stretch_problem(4);
  const SolveReport r = solve_dd(mp, LocalDataSet::graph(kHat2), {});
  EXPECT_EQ(r.init, Init::kClassicalWarmStart);
  EXPECT_EQ(r.classification, Classification::kStrong);
  EXPECT_TRUE(r.assignment.empty());
}

TEST(SolveDD, PipelineIsFrameIndifferent) {
  const Mat q = rotation2d(0.8);
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 800, 0.0, 8, true);
  std::vector<PhasePoint> rotated;
  for (const auto& z : d.points()) rotated.push_back({q * z.F, q * z.P});
  const auto dq = LocalDataSet::cloud(2, rotated);

  BoundaryConditions bc = uniaxial_stretch(0.04);
  BoundaryConditions bcq = bc;
  for (auto& s : bcq.dirichlet) s.A = q * s.A;
  const Mesh m = square_mesh(6, {Side::kLeft, Side::kRight});
  DDConfig cfg;
  cfg.init = Init::kRandomDataAssignment;
  cfg.seed = 3;
  const SolveReport a = solve_dd(MeshProblem(m, bc), LocalDataSet::cloud(2, d.points()), cfg);
  const SolveReport b = solve_dd(MeshProblem(m, bcq), dq, cfg);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_NEAR(a.final_J(), b.final_J(), 1e-10 * (1 + a.final_J()));
  for (std::size_t e = 0; e < m.triangles.size(); ++e) {
    EXPECT_LT(norm(q * a.fields.F[e] - b.fields.F[e]), 1e-10);
    EXPECT_LT(norm(q * a.fields.P[e] - b.fields.P[e]), 1e-10);
  }
}

TEST(SolveDD, InvalidInputs) {
  const MeshProblem mp = stretch_problem(2);
  EXPECT_THROW(solve_dd(mp, LocalDataSet::cloud(2, {}), {}), std::invalid_argument);
  EXPECT_THROW(solve_dd(mp, LocalDataSet::graph(EnergyModel::hat_w3(1, 1, 0.5)), {}), std::invalid_argument);
  DDConfig cfg;
  cfg.dev = DeviationPair::power(3.0);
  EXPECT_THROW(solve_dd(mp, LocalDataSet::graph(kHat2), cfg), std::invalid_argument);
  cfg = {};
  cfg.max_outer = 0;
  EXPECT_THROW(solve_dd(mp, LocalDataSet::graph(kHat2), cfg), std::invalid_argument);
  const auto cloud = LocalDataSet::cloud(2, {{Mat::identity(2), Mat(2)}});
  cfg = {};
  cfg.init = Init::kClassicalWarmStart;
  EXPECT_THROW(solve_dd(mp, cloud, cfg), std::invalid_argument);
}

TEST(Study, NestedSamplesAndDecreasingObjective) {
  const MeshProblem mp = stretch_problem(8);
  const StudyTable t = study_convergence(mp, kHat2, {100, 1000, 10000}, 0.0, 2);
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    EXPECT_LT(t.rows[k].J, t.rows[k - 1].J);
    EXPECT_LT(t.rows[k].delta_gap, t.rows[k - 1].delta_gap);
  }
  EXPECT_GT(t.classical_l2, 0.0);
  const StudyTable noisy = study_convergence(mp, kHat2, {1000, 10000}, 0.05, 2);
  for (const StudyRow& row : noisy.rows) EXPECT_GT(row.J, 0.0);
}
