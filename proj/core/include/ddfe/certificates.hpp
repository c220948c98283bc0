#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddfe/material_data.hpp"
#include "ddfe/material_models.hpp"
#include "ddfe/random.hpp"
#include "ddfe/tensor.hpp"

namespace ddfe {

// Certificates are falsification searches. "no-violation-found" means the
// sampled inequality held everywhere it was evaluated; it is not a proof.

enum class Property {
  kCoercivity,
  kPolymonotone2d,
  kPolymonotone3d,
  kQuasimonotone,
  kGrowth,
  kFrameIndifference,
  kMomentEquilibrium,
};

enum class Verdict { kNoViolationFound, kViolated };

std::string to_string(Property p);
std::string to_string(Verdict v);
Property property_from_string(const std::string& s);
Verdict verdict_from_string(const std::string& s);

/// Sample point at which an inequality was evaluated, with both sides.
/// margin = (side that should be larger) - (side that should be smaller).
struct Witness {
  std::vector<std::pair<std::string, Mat>> matrices;
  std::vector<std::pair<std::string, std::vector<double>>> params;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;

  const Mat& matrix(const std::string& name) const;
  const std::vector<double>& param(const std::string& name) const;
  friend bool operator==(const Witness&, const Witness&) = default;
};

struct Certificate {
  Property property = Property::kCoercivity;
  Verdict verdict = Verdict::kNoViolationFound;
  std::optional<Witness> witness;
  std::uint64_t samples_tested = 0;
  std::map<std::string, double> constants_used;
  std::map<std::string, std::string> labels;
  std::uint64_t seed = 0;
  double min_margin = 0.0;

  bool violated() const noexcept { return verdict == Verdict::kViolated; }
  friend bool operator==(const Certificate&, const Certificate&) = default;
};

/// A margin below -kViolationTolerance (1 + |lhs| + |rhs|) counts as a violation.
inline constexpr double kViolationTolerance = 1e-10;
bool is_violation(double margin, double lhs, double rhs);

// ---------------------------------------------------------------- coercivity

/// (1/c_F)|F|^p + (1/c_P)|P|^q - c <= F.P
struct CoercivityConstants {
  double inv_c_F = 0.0;
  double inv_c_P = 0.0;
  double c = 0.0;
};

/// lhs = xi.T(xi), rhs = the lower bound; margin = lhs - rhs.
Witness coercivity_margin(const StressFunction& t, double p, const CoercivityConstants& k, const Mat& xi);

/// Fits (c_F, c_P, c) on a coarse radial grid over |xi| in [1e-2, 1e2], then
/// fuzzes the fixed-constant inequality over |xi| in [0, 1e3].
CoercivityConstants fit_coercivity_constants(const StressFunction& t, double p, std::uint64_t seed);

Certificate check_coercivity(const StressFunction& t, double p, std::uint64_t budget, std::uint64_t seed);

// ---------------------------------------------------------------- polymonotonicity

/// 2D: (DW(F+G) - DW(F)).G >= a/4 (|G|^2 + 3F.G)^2 + g'(det F) det G + (1 - b/2)|G|^2.
Witness polymonotone_2d_margin(const EnergyModel& m, const Mat& f, const Mat& g);

/// 3D: (DW(F+G) - DW(F)).G >= c' e |G|^6 + g'(det F)(F.cof G + det G) + g'(0)(F.cof G + 2 det G).
Witness polymonotone_3d_margin(const EnergyModel& m, const Mat& f, const Mat& g, double c_prime);

Certificate check_polymonotone_2d(const EnergyModel& m, std::uint64_t budget, std::uint64_t seed);

/// Uses estimate_cstar_constants(seed) when c_prime is not supplied.
Certificate check_polymonotone_3d(const EnergyModel& m, std::uint64_t budget, std::uint64_t seed,
                                  std::optional<double> c_prime = std::nullopt);

// ---------------------------------------------------------------- quasimonotonicity

/// Compactly supported smooth field on the unit cube:
/// phi(x) = eta(x) sum_m A_m sin(2 pi k_m.x + theta_m), with eta a product
/// bump supported in [(1-w)/2, (1+w)/2]^n.
struct TestField {
  struct Mode {
    std::array<int, 3> k{};
    double phase = 0.0;
    std::array<double, 3> amplitude{};
  };

  int n = 2;
  double support = 0.8;
  std::vector<Mode> modes;

  /// D phi at x (analytic).
  Mat gradient(std::span<const double> x) const;
  std::vector<double> encode() const;
  static TestField decode(int n, std::span<const double> values);
  static TestField random(int n, Rng& rng);
};

using GapFunction = std::function<double(const Mat& f, const Mat& g)>;

/// Gap B(F, G) of the model: (1 - b/2)|G|^2 in 2D, c' e |G|^6 in 3D.
GapFunction polymonotone_gap(const EnergyModel& m, double c_prime = 0.0);

/// lhs = int (T(F + D phi) - T(F)).D phi, rhs = int B(F, D phi), midpoint rule on grid^n cells.
Witness quasimonotone_margin(const StressFunction& t, const GapFunction& b, const Mat& f, const TestField& phi,
                             int grid);

Certificate check_quasimonotone(const StressFunction& t, int n, const GapFunction& b, int grid,
                                std::uint64_t budget, std::uint64_t seed);

// ---------------------------------------------------------------- growth

/// |T(F+G) - T(F)| / ((|F|^{p-2} + |G|^{p-2} + 1)|G|); 0 when G = 0.
double growth_ratio(const StressFunction& t, double p, const Mat& f, const Mat& g);

/// lhs = c (|F|^{p-2} + |G|^{p-2} + 1)|G|, rhs = |T(F+G) - T(F)|.
Witness growth_margin(const StressFunction& t, double p, double c, const Mat& f, const Mat& g);

/// Ratio maximization along a radial ladder |F| in [1e-2, 1e3]; violated when
/// the ratio exceeds 10x its value on the |F| <= 1 rungs.
Certificate check_growth(const StressFunction& t, double p, std::uint64_t budget, std::uint64_t seed);

// ---------------------------------------------------------------- data-set checks

/// lhs = allowed resolution, rhs = distance of (QF, QP) to the data set.
Witness frame_gap_margin(const LocalDataSet& d, const PhasePoint& z, const Mat& q);

Certificate check_frame_indifference(const LocalDataSet& d, std::uint64_t budget, std::uint64_t seed);

/// lhs = 1e-10 (1 + |F||P|), rhs = |P F^T - F P^T|.
Witness moment_margin(const PhasePoint& z);

Certificate check_moment_equilibrium(const LocalDataSet& d, std::uint64_t budget, std::uint64_t seed);

// ---------------------------------------------------------------- 3D constants

/// Numerical estimates of the non-explicit 3D constants.
///
/// c_starstar ~ min E(F,G) / ((|F|^4 + |G|^4)|G|^2) with E the monotonicity
/// gap of |F|^6/6; C_star ~ max |det(F+G)|(|F|/sqrt3 + 2|G|/3^{3/2}) / (|F|^4 + |G|^4).
/// A minimization returns an upper estimate of an infimum, so c_prime and
/// c_star inherit a small upward bias.
struct CstarConstants {
  double c_starstar = 0.0;
  double c_prime = 0.0;
  double C_star = 0.0;
  double c_star = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
};

/// E(F,G) = (DW_six(F+G) - DW_six(F)).G with W_six = |F|^6 / 6.
double w_six_monotonicity_gap(const Mat& f, const Mat& g);
double cstarstar_ratio(const Mat& f, const Mat& g);
double Cstar_ratio(const Mat& f, const Mat& g);

CstarConstants estimate_cstar_constants(std::uint64_t seed, std::uint64_t budget);

}  // namespace ddfe
