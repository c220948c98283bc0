#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ddfe/kdtree.hpp"
#include "ddfe/material_models.hpp"
#include "ddfe/tensor.hpp"

namespace ddfe {

/// Pointwise state (F, P): deformation gradient and first Piola-Kirchhoff stress.
struct PhasePoint {
  Mat F;
  Mat P;

  int dim() const noexcept { return F.dim(); }
  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

/// Convex deviation V and its conjugate V*, defining the phase-space metric.
///
/// quadratic: V = C/2 |xi|^2, V* = |eta|^2 / (2C), p = q = 2.
/// power:     V = |xi|^p / p, V* = |eta|^q / q, q = p/(p-1).
class DeviationPair {
 public:
  enum class Form { kQuadratic, kPower };

  static DeviationPair quadratic(double modulus = 1.0);
  static DeviationPair power(double p);

  Form form() const noexcept { return form_; }
  bool is_quadratic() const noexcept { return form_ == Form::kQuadratic; }
  /// C of the quadratic form (1 for the power form).
  double modulus() const noexcept { return modulus_; }
  double p() const noexcept { return p_; }
  double q() const noexcept { return q_; }
  /// Lower-bound constants c_p |xi|^p <= V(xi), c_q |eta|^q <= V*(eta).
  double c_p() const noexcept;
  double c_q() const noexcept;

  double V(const Mat& xi) const;
  double V_star(const Mat& eta) const;
  Mat grad_V(const Mat& xi) const;
  Mat grad_V_star(const Mat& eta) const;
  double deviation(const PhasePoint& z, const PhasePoint& data) const { return V(z.F - data.F) + V_star(z.P - data.P); }

  friend bool operator==(const DeviationPair&, const DeviationPair&) = default;

 private:
  Form form_ = Form::kQuadratic;
  double modulus_ = 1.0;
  double p_ = 2.0;
  double q_ = 2.0;
};

/// Axis-aligned sampling box for F: center +- half_width entrywise.
struct SamplingBox {
  Mat center;
  Mat half_width;

  static SamplingBox around(const Mat& center, double half_width);
  friend bool operator==(const SamplingBox&, const SamplingBox&) = default;
};

/// Provenance recorded alongside a data set.
struct DataSetMetadata {
  std::string source = "cloud";  // "graph", "sampled-graph", "cloud", "file"
  std::optional<EnergyModel> model;
  std::optional<SamplingBox> box;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool filter_det = false;
  std::size_t base_count = 0;
  int m_rot = 1;
  /// Largest angular distance from any rotation to the orbit rotation set.
  double orbit_gap_angle = 0.0;
  bool orbit_gap_empirical = false;
  std::optional<double> moment_filter_tol;
  std::size_t moment_filter_removed = 0;
};

/// Local material data set: the graph of a stress function, or a finite
/// cloud of phase points.
class LocalDataSet {
 public:
  enum class Kind { kGraph, kCloud };

  static LocalDataSet graph(const EnergyModel& m, double perturbation_scale = 0.5);
  static LocalDataSet graph(StressFunction t, double perturbation_scale = 0.5);
  static LocalDataSet cloud(int n, std::vector<PhasePoint> points, DataSetMetadata meta = {});

  LocalDataSet(const LocalDataSet& other);
  LocalDataSet& operator=(const LocalDataSet& other);
  LocalDataSet(LocalDataSet&&) noexcept;
  LocalDataSet& operator=(LocalDataSet&&) noexcept;
  ~LocalDataSet();

  Kind kind() const noexcept { return kind_; }
  bool is_graph() const noexcept { return kind_ == Kind::kGraph; }
  int dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return kind_ == Kind::kCloud && points_.empty(); }
  const std::vector<PhasePoint>& points() const noexcept { return points_; }
  const PhasePoint& point(std::size_t i) const { return points_.at(i); }
  const DataSetMetadata& metadata() const noexcept { return meta_; }
  DataSetMetadata& metadata() noexcept { return meta_; }

  const StressFunction& stress() const;
  /// DT(F)[H]: analytic when a model is attached, differences otherwise.
  Mat stress_tangent(const Mat& f, const Mat& h) const;
  double perturbation_scale() const noexcept { return perturbation_scale_; }

  /// Index over the embedding (sqrt(C) F, P / sqrt(C)); built once per modulus.
  std::shared_ptr<const KdTree> index(double modulus) const;

 private:
  LocalDataSet() = default;

  Kind kind_ = Kind::kCloud;
  int n_ = 2;
  std::vector<PhasePoint> points_;
  std::optional<StressFunction> stress_;
  double perturbation_scale_ = 0.5;
  DataSetMetadata meta_;

  mutable std::mutex index_mutex_;
  mutable std::shared_ptr<const KdTree> index_;
  mutable double index_modulus_ = 0.0;
};

/// Embedded coordinates (sqrt(C) F, P / sqrt(C)); squared distances equal 2(V + V*).
std::vector<double> embed(const PhasePoint& z, double modulus);

/// Samples (F_i, T(F_i) + eps_i); F_i uniform in the box (optionally with
/// det F > 0) and eps_i Gaussian with RMS norm noise |T(F_i)|.
LocalDataSet sample_graph(const EnergyModel& m, const SamplingBox& box, std::size_t count, double noise,
                          std::uint64_t seed, bool filter_det);

struct PsiResult {
  double value = 0.0;
  PhasePoint argmin;
  std::size_t index = 0;  // cloud only
  /// False for graph data sets, where the inner minimization is a local search.
  bool certified = true;
};

/// psi(z) = min over D of V(F - F') + V*(P - P').
PsiResult psi(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z);

/// Exact minimizer of the deviation over a cloud (lowest index on ties).
/// Graph data sets are routed to psi.
PsiResult nearest(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z);

/// Keeps points with |P F^T - F P^T| <= tol (1 + |F||P|).
LocalDataSet filter_moment_equilibrium(const LocalDataSet& d, double tol);

/// Replaces every point by m_rot rotated copies (Q_j F, Q_j P), Q_0 = I.
LocalDataSet augment_orbit(const LocalDataSet& d, int m_rot);

/// Rotations used by augment_orbit: equispaced angles in 2D, a Halton
/// sequence mapped to unit quaternions in 3D.
std::vector<Mat> orbit_rotations(int n, int m_rot);

/// |P F^T - F P^T|.
double moment_residual(const PhasePoint& z);

}  // namespace ddfe
