#include <benchmark/benchmark.h>

#include <vector>

#include "ddfe/certificates.hpp"
#include "ddfe/dd_solver.hpp"
#include "ddfe/kdtree.hpp"
#include "ddfe/random.hpp"

using namespace ddfe;

namespace {

const EnergyModel kHat2 = EnergyModel::hat_w2(0.25, 0.4);

KdTree random_tree(std::size_t count, std::size_t k, Rng& rng) {
  std::vector<double> coords(count * k);
  for (double& x : coords) x = rng.normal();
  return KdTree(std::move(coords), k);
}

void BM_KdTreeNearest(benchmark::State& state) {
  Rng rng(1);
  const KdTree tree = random_tree(static_cast<std::size_t>(state.range(0)), 8, rng);
  std::vector<double> q(8);
  for (auto _ : state) {
    for (double& x : q) x = rng.normal();
    benchmark::DoNotOptimize(tree.nearest(q));
  }
}
BENCHMARK(BM_KdTreeNearest)->Range(1 << 10, 1 << 17);

void BM_LinearNearest(benchmark::State& state) {
  Rng rng(1);
  const KdTree tree = random_tree(static_cast<std::size_t>(state.range(0)), 8, rng);
  std::vector<double> q(8);
  for (auto _ : state) {
    for (double& x : q) x = rng.normal();
    benchmark::DoNotOptimize(tree.nearest_linear(q));
  }
}
BENCHMARK(BM_LinearNearest)->Range(1 << 10, 1 << 17);

MeshProblem stretch(int n) { return MeshProblem(square_mesh(n, {Side::kLeft, Side::kRight}), uniaxial_stretch(0.04)); }

std::vector<Mat> random_fields(std::size_t count, Rng& rng) {
  std::vector<Mat> f(count, Mat::identity(2));
  for (Mat& m : f)
    for (int k = 0; k < 4; ++k) m[k] += 0.1 * rng.normal();
  return f;
}

void BM_ProjectorFactorize(benchmark::State& state) {
  const MeshProblem mp = stretch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Projector(mp));
}
BENCHMARK(BM_ProjectorFactorize)->RangeMultiplier(2)->Range(8, 64);

void BM_CompatibleProjection(benchmark::State& state) {
  const MeshProblem mp = stretch(static_cast<int>(state.range(0)));
  const Projector proj(mp);
  Rng rng(2);
  const std::vector<Mat> f = random_fields(mp.element_count(), rng);
  const DeviationPair dev = DeviationPair::quadratic(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(proj.project_compatible(f, dev));
}
BENCHMARK(BM_CompatibleProjection)->RangeMultiplier(2)->Range(8, 64);

void BM_EquilibriumProjection(benchmark::State& state) {
  const MeshProblem mp = stretch(static_cast<int>(state.range(0)));
  const Projector proj(mp);
  Rng rng(3);
  const std::vector<Mat> p = random_fields(mp.element_count(), rng);
  const DeviationPair dev = DeviationPair::quadratic(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(proj.project_equilibrium(p, dev));
}
BENCHMARK(BM_EquilibriumProjection)->RangeMultiplier(2)->Range(8, 64);

void BM_SolveDD(benchmark::State& state) {
  const MeshProblem mp = stretch(16);
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.2),
                              static_cast<std::size_t>(state.range(0)), 0.01, 4, true);
  DDConfig cfg;
  cfg.seed = 4;
  cfg.init = Init::kRandomDataAssignment;
  for (auto _ : state) benchmark::DoNotOptimize(solve_dd(mp, d, cfg));
}
BENCHMARK(BM_SolveDD)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMillisecond);

void BM_CoercivityCertificate(benchmark::State& state) {
  const StressFunction s = stress_function(kHat2);
  for (auto _ : state) benchmark::DoNotOptimize(check_coercivity(s, 4.0, 100000, 5));
}
BENCHMARK(BM_CoercivityCertificate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
