#include "ddfe/dd_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ddfe/parallel.hpp"
#include "ddfe/random.hpp"

namespace ddfe {

std::string to_string(Init i) {
  switch (i) {
    case Init::kAuto: return "auto";
    case Init::kZeroState: return "zero-state";
    case Init::kClassicalWarmStart: return "classical-warm-start";
    case Init::kRandomDataAssignment: return "random-data-assignment";
  }
  return "?";
}

Init init_from_string(const std::string& s) {
  for (Init i : {Init::kAuto, Init::kZeroState, Init::kClassicalWarmStart, Init::kRandomDataAssignment})
    if (to_string(i) == s) return i;
  throw std::invalid_argument("unknown init '" + s + "'");
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::kStrong: return "strong";
    case Classification::kGeneralized: return "generalized";
    case Classification::kNonConverged: return "non-converged";
  }
  return "?";
}

Classification classification_from_string(const std::string& s) {
  for (Classification c : {Classification::kStrong, Classification::kGeneralized, Classification::kNonConverged})
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown classification '" + s + "'");
}

double DDConfig::resolved_tol_J(std::size_t elements) const {
  return tol_J ? *tol_J : 1e-10 * static_cast<double>(elements) * dev.modulus();
}

Classification classify_solution(const SolveReport& report, double tol_J) {
  if (!report.J_history.empty() && report.final_J() <= tol_J) return Classification::kStrong;
  if (report.stagnated) return Classification::kGeneralized;
  return Classification::kNonConverged;
}

namespace {

struct Assignment {
  std::vector<PhasePoint> branch;
  std::vector<std::size_t> index;
};

bool same_point(const PhasePoint& a, const PhasePoint& b) {
  const double scale = 1.0 + norm(a.F) + norm(a.P);
  return norm(a.F - b.F) + norm(a.P - b.P) <= 1e-12 * scale;
}

// Nearest data point per element. A current assignment is only replaced by a
// strictly closer point, so ties never flip the assignment.
Assignment assign(const LocalDataSet& d, const DeviationPair& dev, const std::vector<Mat>& f,
                  const std::vector<Mat>& p, const Assignment* current, bool* changed) {
  const std::size_t ne = f.size();
  constexpr std::size_t kChunk = 64;
  struct Chunk {
    std::vector<PhasePoint> branch;
    std::vector<std::size_t> index;
    bool changed = false;
  };
  auto chunks = parallel_batches<Chunk>((ne + kChunk - 1) / kChunk, [&](std::size_t c) {
    Chunk out;
    for (std::size_t e = c * kChunk; e < std::min(ne, (c + 1) * kChunk); ++e) {
      const PhasePoint z{f[e], p[e]};
      PsiResult hit = nearest(d, dev, z);
      if (current) {
        const PhasePoint& old = current->branch[e];
        if (!(hit.value < dev.deviation(z, old))) {
          out.branch.push_back(old);
          out.index.push_back(d.is_graph() ? 0 : current->index[e]);
          continue;
        }
        out.changed = out.changed || (d.is_graph() ? !same_point(hit.argmin, old) : hit.index != current->index[e]);
      }
      out.branch.push_back(std::move(hit.argmin));
      out.index.push_back(hit.index);
    }
    return out;
  });
  Assignment a;
  bool any = false;
  for (Chunk& c : chunks) {
    a.branch.insert(a.branch.end(), c.branch.begin(), c.branch.end());
    a.index.insert(a.index.end(), c.index.begin(), c.index.end());
    any = any || c.changed;
  }
  if (changed) *changed = any;
  return a;
}

}  // namespace

SolveReport solve_dd(const MeshProblem& mp, const LocalDataSet& d, const DDConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (d.empty()) throw std::invalid_argument("solve_dd: empty data set");
  if (d.dim() != 2) throw std::invalid_argument("solve_dd: data set must be two-dimensional");
  if (!cfg.dev.is_quadratic()) throw std::invalid_argument("solve_dd: the quadratic deviation pair is required");
  if (cfg.max_outer < 1) throw std::invalid_argument("solve_dd: max_outer must be >= 1");
  if (cfg.tol_J && !(*cfg.tol_J >= 0.0)) throw std::invalid_argument("solve_dd: tol_J must be >= 0");

  const std::size_t ne = mp.element_count();
  SolveReport rep;
  rep.tol_J = cfg.resolved_tol_J(ne);
  rep.data_count = d.is_graph() ? 0 : d.size();
  rep.init = cfg.init;
  if (rep.init == Init::kAuto) {
    rep.init = d.metadata().model && d.metadata().model->dim() == 2 ? Init::kClassicalWarmStart
                                                                    : Init::kRandomDataAssignment;
  }

  Assignment current;
  switch (rep.init) {
    case Init::kZeroState: {
      const std::vector<Mat> zero(ne, Mat(2));
      current = assign(d, cfg.dev, zero, zero, nullptr, nullptr);
      break;
    }
    case Init::kClassicalWarmStart: {
      if (!d.metadata().model) throw std::invalid_argument("solve_dd: classical warm start needs a generating model");
      const ClassicalSolution cl = solve_classical(mp, *d.metadata().model);
      current = assign(d, cfg.dev, cl.fields.F, cl.fields.P, nullptr, nullptr);
      break;
    }
    case Init::kRandomDataAssignment: {
      Rng rng(cfg.seed, 0xDD);
      for (std::size_t e = 0; e < ne; ++e) {
        if (d.is_graph()) {
          const Mat f = Mat::identity(2) + 0.1 * rng.normal_mat(2);
          current.branch.push_back({f, d.stress()(f)});
          current.index.push_back(0);
        } else {
          const std::size_t i = rng.index(d.size());
          current.branch.push_back(d.point(i));
          current.index.push_back(i);
        }
      }
      break;
    }
    case Init::kAuto: break;
  }

  const Projector proj(mp);
  for (int it = 1; it <= cfg.max_outer; ++it) {
    if (it > 1) {
      bool changed = false;
      Assignment next = assign(d, cfg.dev, rep.fields.F, rep.fields.P, &current, &changed);
      if (!changed && cfg.stop_on_stagnation) {
        rep.stagnated = true;
        break;
      }
      current = std::move(next);
    }
    std::vector<Mat> fs, ps;
    fs.reserve(ne);
    ps.reserve(ne);
    for (const PhasePoint& z : current.branch) {
      fs.push_back(z.F);
      ps.push_back(z.P);
    }
    CompatibleProjection cp = proj.project_compatible(fs, cfg.dev);
    EquilibriumProjection ep = proj.project_equilibrium(ps, cfg.dev);
    rep.fields = {std::move(cp.u), std::move(cp.F), std::move(ep.P), std::move(ep.lambda), true, true};

    double j = 0.0;
    for (std::size_t e = 0; e < ne; ++e)
      j += mp.area(e) * cfg.dev.deviation({rep.fields.F[e], rep.fields.P[e]}, current.branch[e]);
    if (!rep.J_history.empty() && j > rep.J_history.back()) {
      rep.defects.push_back("J increased at iteration " + std::to_string(it) + " by " +
                            std::to_string(j - rep.J_history.back()));
    }
    rep.J_history.push_back(j);
    rep.iterations = it;
  }

  rep.data_branch = std::move(current.branch);
  if (!d.is_graph()) rep.assignment = std::move(current.index);
  rep.classification = classify_solution(rep, rep.tol_J);
  rep.diagnostics = discrete_diagnostics(proj, rep.fields, rep.data_branch, cfg.dev);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

SamplingBox state_box(const std::vector<Mat>& f, double factor) {
  if (f.empty()) throw std::invalid_argument("state_box: no states");
  const int n = f[0].dim();
  Mat lo = f[0], hi = f[0];
  for (const Mat& x : f)
    for (int k = 0; k < x.size(); ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  SamplingBox box{Mat(n), Mat(n)};
  for (int k = 0; k < lo.size(); ++k) {
    box.center[k] = 0.5 * (lo[k] + hi[k]);
    // A flat component still gets a thin slab so the box is never empty.
    box.half_width[k] = std::max(factor * 0.5 * (hi[k] - lo[k]), 1e-3 * factor);
  }
  return box;
}

StudyTable study_convergence(const MeshProblem& mp, const EnergyModel& m, const std::vector<std::size_t>& counts,
                             double noise, std::uint64_t seed, const DDConfig& base) {
  if (m.dim() != 2) throw std::invalid_argument("study_convergence needs a 2D model");
  if (counts.empty()) throw std::invalid_argument("study_convergence needs at least one count");
  const ClassicalSolution cl = solve_classical(mp, m);
  StudyTable t;
  t.noise = noise;
  t.seed = seed;
  t.classical_energy = cl.energy;
  t.classical_l2 = l2_norm(mp, cl.fields.u);
  t.box = state_box(cl.fields.F, 1.5);
  for (std::size_t n : counts) {
    const LocalDataSet d = sample_graph(m, t.box, n, noise, seed, true);
    DDConfig cfg = base;
    cfg.init = Init::kClassicalWarmStart;
    const SolveReport r = solve_dd(mp, d, cfg);
    std::vector<Vec2> diff(cl.fields.u.size());
    for (std::size_t k = 0; k < diff.size(); ++k)
      diff[k] = {r.fields.u[k][0] - cl.fields.u[k][0], r.fields.u[k][1] - cl.fields.u[k][1]};
    StudyRow row;
    row.count = n;
    row.J = r.final_J();
    row.l2_error = l2_norm(mp, diff);
    row.delta_gap = r.diagnostics.delta_gap;
    row.curl_residual = r.diagnostics.curl_residual;
    row.div_residual = r.diagnostics.div_residual;
    row.classification = r.classification;
    row.iterations = r.iterations;
    row.J_monotone = std::is_sorted(r.J_history.rbegin(), r.J_history.rend());
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace ddfe
