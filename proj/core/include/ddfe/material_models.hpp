#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ddfe/tensor.hpp"

namespace ddfe {

/// Stress function T : R^{n x n} -> R^{n x n} of a fixed dimension.
struct StressFunction {
  int dim = 2;
  std::function<Mat(const Mat&)> eval;

  Mat operator()(const Mat& f) const { return eval(f); }
};

/// Convex scalar function g of det(xi), with the linear growth bound
/// |g'(t)| <= b + d|t|.
///
/// Two forms exist: the quadratic-shifted g(t) = beta/2 (t - t0)^2 that
/// realizes every explicit energy here, and a tabulated form where g' is
/// piecewise linear between knots (extrapolated with the end slopes). The
/// tabulated form has no analytic g'', so tangents fall back to differences.
class ConvexScalarG {
 public:
  enum class Form { kQuadratic, kTable };

  /// g == 0.
  ConvexScalarG() = default;
  static ConvexScalarG quadratic(double beta, double t0);
  /// Knots must be strictly increasing and slopes non-decreasing; g(knots[0]) = value0.
  static ConvexScalarG table(std::vector<double> knots, std::vector<double> slopes, double value0 = 0.0);

  Form form() const noexcept { return form_; }
  double beta() const noexcept { return beta_; }
  double t0() const noexcept { return t0_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& slopes() const noexcept { return slopes_; }
  double value0() const noexcept { return value0_; }

  double value(double t) const;
  double derivative(double t) const;
  /// Only defined for the quadratic form.
  double second_derivative(double t) const;
  bool has_second_derivative() const noexcept { return form_ == Form::kQuadratic; }

  /// Constant b of the bound |g'(t)| <= b + d|t|.
  double growth_b() const noexcept { return b_; }
  /// Constant d of the bound |g'(t)| <= b + d|t|; also |g'(t) - g'(s)| <= d(|t| + |s|).
  double growth_d() const noexcept { return d_; }

 private:
  Form form_ = Form::kQuadratic;
  double beta_ = 0.0;
  double t0_ = 0.0;
  std::vector<double> knots_;
  std::vector<double> slopes_;
  std::vector<double> knot_values_;
  double value0_ = 0.0;
  double b_ = 0.0;
  double d_ = 0.0;
};

enum class Flavor { kW2, kW3, kHatW2, kHatW3 };

std::string to_string(Flavor f);
Flavor flavor_from_string(const std::string& s);

/// Parameter windows of the proven results, evaluated once at construction.
struct ParameterFlags {
  /// Growth hypotheses for (4,4/3)- resp. (6,6/5)-coercivity: b > 0 and d < 2a (2D) or d < 3e (3D).
  bool coercivity = false;
  /// 2D polymonotone bound hypotheses b <= 2 and d <= 3a.
  bool polymonotone_2d = false;
  /// b == 2: the gap term (1 - b/2)|G|^2 vanishes identically.
  bool polymonotone_boundary_case = false;
  /// hatW2 closedness window a in (0, 1/4] and beta in (0, 2a).
  bool closedness_window_2d = false;
};

/// W(xi) = |xi|^2/2 + a|xi|^4/4 + e|xi|^6/6 + g(det xi).
///
/// The hat flavors fix g to beta/2 (det - t0)^2 with t0 chosen so that the
/// minimizers are exactly the rotations: t0 = 1 + (1+2a)/beta in 2D and
/// t0 = 1 + (1+3a+9e)/beta in 3D.
class EnergyModel {
 public:
  static EnergyModel w2(double a, ConvexScalarG g = {});
  static EnergyModel w3(double a, double e, ConvexScalarG g = {});
  static EnergyModel hat_w2(double a, double beta);
  static EnergyModel hat_w3(double a, double e, double beta);

  Flavor flavor() const noexcept { return flavor_; }
  int dim() const noexcept { return n_; }
  double a() const noexcept { return a_; }
  double e() const noexcept { return e_; }
  /// Curvature of g for the hat flavors (0 for others unless g is quadratic).
  double beta() const noexcept { return g_.beta(); }
  const ConvexScalarG& g() const noexcept { return g_; }
  const ParameterFlags& flags() const noexcept { return flags_; }

  bool is_hat() const noexcept { return flavor_ == Flavor::kHatW2 || flavor_ == Flavor::kHatW3; }
  /// min W, attained on SO(n); only for hat flavors.
  double closed_form_minimum() const;

 private:
  EnergyModel(Flavor flavor, int n, double a, double e, ConvexScalarG g);

  Flavor flavor_;
  int n_;
  double a_;
  double e_;
  ConvexScalarG g_;
  ParameterFlags flags_;
};

double energy(const EnergyModel& m, const Mat& xi);

/// T = DW = xi (1 + a|xi|^2 + e|xi|^4) + g'(det xi) cof xi.
Mat stress(const EnergyModel& m, const Mat& xi);

/// Directional derivative DT(xi)[h]. Analytic for quadratic g, central
/// differences for tabulated g.
Mat stress_tangent(const EnergyModel& m, const Mat& xi, const Mat& h);

StressFunction stress_function(const EnergyModel& m);

struct EnergyMinimum {
  Mat xi;
  double energy = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Local minimization of W from `start` (BFGS with Armijo backtracking,
/// finished by Newton steps on the exact Hessian).
EnergyMinimum minimize_energy(const EnergyModel& m, const Mat& start, double grad_tol = 1e-12, int max_iter = 2000);

}  // namespace ddfe
