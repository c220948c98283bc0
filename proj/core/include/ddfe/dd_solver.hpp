#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddfe/fem.hpp"
#include "ddfe/material_data.hpp"
#include "ddfe/material_models.hpp"

namespace ddfe {

enum class Init { kAuto, kZeroState, kClassicalWarmStart, kRandomDataAssignment };
std::string to_string(Init i);
Init init_from_string(const std::string& s);

enum class Classification { kStrong, kGeneralized, kNonConverged };
std::string to_string(Classification c);
Classification classification_from_string(const std::string& s);

struct DDConfig {
  DeviationPair dev = DeviationPair::quadratic(1.0);
  int max_outer = 200;
  /// Stop when the assignment no longer changes.
  bool stop_on_stagnation = true;
  /// Absolute objective floor; default 1e-10 x elements x modulus.
  std::optional<double> tol_J;
  std::uint64_t seed = 0;
  /// kAuto: classical warm start when the data set records its model, random assignment otherwise.
  Init init = Init::kAuto;

  double resolved_tol_J(std::size_t elements) const;
  friend bool operator==(const DDConfig&, const DDConfig&) = default;
};

struct SolveReport {
  std::vector<double> J_history;
  ElementFields fields;
  std::vector<PhasePoint> data_branch;
  /// Cloud indices of the data branch (empty for graph data sets).
  std::vector<std::size_t> assignment;
  Classification classification = Classification::kNonConverged;
  Diagnostics diagnostics;
  int iterations = 0;
  bool stagnated = false;
  double tol_J = 0.0;
  std::size_t data_count = 0;  // cloud size (0 for graph data sets)
  Init init = Init::kAuto;  // resolved
  /// Invariant breaches observed during the run (e.g. J increased).
  std::vector<std::string> defects;
  double wall_time_s = 0.0;  // not serialized

  double final_J() const { return J_history.empty() ? 0.0 : J_history.back(); }
};

/// strong if J <= tol_J; generalized (local, stationary for the alternating
/// scheme) if the assignment stagnated; non-converged otherwise.
Classification classify_solution(const SolveReport& report, double tol_J);

/// Alternating minimization: nearest-point assignment, then both projections.
SolveReport solve_dd(const MeshProblem& mp, const LocalDataSet& d, const DDConfig& cfg);

struct StudyRow {
  std::size_t count = 0;
  double J = 0.0;
  double l2_error = 0.0;  // |u_dd - u_classical|_L2
  double delta_gap = 0.0;
  double curl_residual = 0.0;
  double div_residual = 0.0;
  Classification classification = Classification::kNonConverged;
  int iterations = 0;
  bool J_monotone = true;

  friend bool operator==(const StudyRow&, const StudyRow&) = default;
};

struct StudyTable {
  double noise = 0.0;
  std::uint64_t seed = 0;
  double classical_energy = 0.0;
  double classical_l2 = 0.0;  // |u_classical|_L2
  SamplingBox box;
  std::vector<StudyRow> rows;
};

/// For each N: N graph samples in a box 1.5x the classical state range, solve
/// with a classical warm start, compare against the classical solution.
StudyTable study_convergence(const MeshProblem& mp, const EnergyModel& m, const std::vector<std::size_t>& counts,
                             double noise, std::uint64_t seed, const DDConfig& base = {});

/// Box around the classical F field, half widths `factor` times the half range.
SamplingBox state_box(const std::vector<Mat>& f, double factor);

}  // namespace ddfe
