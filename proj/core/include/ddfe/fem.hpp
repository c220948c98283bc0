#pragma once

#include <array>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddfe/material_data.hpp"
#include "ddfe/material_models.hpp"
#include "ddfe/tensor.hpp"

namespace ddfe {

using Vec2 = std::array<double, 2>;
using Edge = std::array<int, 2>;
using Triangle = std::array<int, 3>;

/// Raw triangulation with the boundary split into Dirichlet and Neumann edges.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<Triangle> triangles;
  std::vector<Edge> dirichlet_edges;
  std::vector<Edge> neumann_edges;

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

enum class Side { kLeft, kRight, kBottom, kTop };
Side side_from_string(const std::string& s);
std::string to_string(Side s);

/// Structured N x N mesh of the unit square with alternating diagonals, so
/// the mesh is symmetric under both mid-line reflections for even N. Sides
/// not listed as Dirichlet are Neumann.
Mesh square_mesh(int n, const std::set<Side>& dirichlet_sides);

/// Picks boundary edges out of the Dirichlet or Neumann list.
struct EdgeSelector {
  enum class Kind { kAll, kList, kX, kY };
  Kind kind = Kind::kAll;
  std::vector<int> indices;  // kList: positions in the edge list
  double value = 0.0;        // kX / kY: both end nodes on this coordinate line

  friend bool operator==(const EdgeSelector&, const EdgeSelector&) = default;
};

/// g_D(x) = A x + b on the selected Dirichlet edges.
struct DirichletSpec {
  EdgeSelector edges;
  Mat A = Mat::identity(2);
  Vec2 b{};

  friend bool operator==(const DirichletSpec&, const DirichletSpec&) = default;
};

/// Constant traction h_N on the selected Neumann edges.
struct NeumannSpec {
  EdgeSelector edges;
  Vec2 traction{};

  friend bool operator==(const NeumannSpec&, const NeumannSpec&) = default;
};

/// Later specs override earlier ones on shared nodes/edges. Dirichlet nodes
/// not reached by any spec are held at their reference position (g_D = x).
/// body_force: empty (zero), one entry (constant) or one per element.
struct BoundaryConditions {
  std::vector<DirichletSpec> dirichlet;
  std::vector<NeumannSpec> neumann;
  std::vector<Vec2> body_force;

  friend bool operator==(const BoundaryConditions&, const BoundaryConditions&) = default;
};

/// Clamped ends x = 0 (g_D = x) and x = 1 (g_D = diag(1 + strain, 1) x).
BoundaryConditions uniaxial_stretch(double strain);
/// g_D = A x + b on every Dirichlet edge.
BoundaryConditions affine_dirichlet(const Mat& a, const Vec2& b = {});

/// Thrown for invalid meshes and boundary data.
class MeshError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Validated mesh with resolved loads.
class MeshProblem {
 public:
  MeshProblem(Mesh mesh, BoundaryConditions bc);

  const Mesh& mesh() const noexcept { return mesh_; }
  const BoundaryConditions& boundary_conditions() const noexcept { return bc_; }
  std::size_t node_count() const noexcept { return mesh_.nodes.size(); }
  std::size_t element_count() const noexcept { return mesh_.triangles.size(); }

  double area(std::size_t e) const { return area_.at(e); }
  const std::vector<double>& areas() const noexcept { return area_; }
  /// Gradients of the three barycentric hat functions on element e.
  const std::array<Vec2, 3>& shape_gradients(std::size_t e) const { return grad_.at(e); }

  bool is_dirichlet(std::size_t node) const { return dirichlet_.at(node); }
  const Vec2& g_D(std::size_t node) const { return g_d_.at(node); }
  const Vec2& body_force(std::size_t e) const { return f_.at(e); }
  const Vec2& traction(std::size_t neumann_edge) const { return h_n_.at(neumann_edge); }

  /// Interior edges as (node a, node b, element left, element right).
  struct InteriorEdge {
    Edge nodes;
    int e0, e1;
  };
  const std::vector<InteriorEdge>& interior_edges() const noexcept { return interior_; }

  /// Free (non-Dirichlet) node numbering; -1 for Dirichlet nodes.
  int free_index(std::size_t node) const { return free_.at(node); }
  std::size_t free_count() const noexcept { return free_count_; }

 private:
  Mesh mesh_;
  BoundaryConditions bc_;
  std::vector<double> area_;
  std::vector<std::array<Vec2, 3>> grad_;
  std::vector<bool> dirichlet_;
  std::vector<Vec2> g_d_;
  std::vector<Vec2> f_;
  std::vector<Vec2> h_n_;
  std::vector<InteriorEdge> interior_;
  std::vector<int> free_;
  std::size_t free_count_ = 0;
};

/// Nodal field u, element states (F, P), equilibrium multipliers lambda.
struct ElementFields {
  std::vector<Vec2> u;
  std::vector<Mat> F;
  std::vector<Mat> P;
  std::vector<Vec2> lambda;
  bool compatible = false;
  bool equilibrated = false;

  friend bool operator==(const ElementFields&, const ElementFields&) = default;
};

/// Discrete gradient of a nodal field on element e.
Mat element_gradient(const MeshProblem& mp, const std::vector<Vec2>& u, std::size_t e);
std::vector<Mat> element_gradients(const MeshProblem& mp, const std::vector<Vec2>& u);

/// External work of loads: sum_e w_e f_e.v_e(centroid) + sum_N int h_N.v.
double external_work(const MeshProblem& mp, const std::vector<Vec2>& v);

/// Nodal weak residual r(P)[phi_k e_i] = sum_e w_e P_e.D(phi_k e_i) - loads, all nodes.
std::vector<Vec2> equilibrium_residual(const MeshProblem& mp, const std::vector<Mat>& p);

/// Euclidean norm of r(P) restricted to free nodes.
double equilibrium_residual_norm(const MeshProblem& mp, const std::vector<Mat>& p);

/// Exact L2 norm of a P1 field.
double l2_norm(const MeshProblem& mp, const std::vector<Vec2>& u);

/// sum_e w_e W(Du_e) - external work.
double total_energy(const MeshProblem& mp, const EnergyModel& m, const std::vector<Vec2>& u);

struct CompatibleProjection {
  std::vector<Vec2> u;
  std::vector<Mat> F;
  double residual = 0.0;  // relative residual of the normal equations
};

struct EquilibriumProjection {
  std::vector<Mat> P;
  std::vector<Vec2> lambda;
  double residual = 0.0;  // |r(P)| on free nodes
};

/// Owns the factorized stiffness sum_e w_e Dphi_k.Dphi_l on free nodes, which
/// is the system matrix of both projections.
class Projector {
 public:
  explicit Projector(const MeshProblem& mp);
  ~Projector();
  Projector(Projector&&) noexcept;
  Projector& operator=(Projector&&) noexcept;

  const MeshProblem& problem() const noexcept { return *mp_; }

  /// argmin sum_e w_e V(Du_e - F*_e) over u = g_D on Dirichlet nodes.
  CompatibleProjection project_compatible(const std::vector<Mat>& f_star, const DeviationPair& dev) const;

  /// argmin sum_e w_e V*(P_e - P*_e) subject to r(P) = 0 on free test fields.
  EquilibriumProjection project_equilibrium(const std::vector<Mat>& p_star, const DeviationPair& dev) const;

  /// sqrt(r^T K^{-1} r) for a residual on free nodes.
  double dual_norm(const std::vector<Vec2>& residual) const;

  /// Solves K x = rhs (free nodes, two columns) with refinement.
  std::vector<Vec2> solve(const std::vector<Vec2>& rhs, double* relative_residual = nullptr) const;

 private:
  struct Impl;
  const MeshProblem* mp_;
  std::unique_ptr<Impl> impl_;
};

CompatibleProjection project_compatible(const MeshProblem& mp, const std::vector<Mat>& f_star,
                                        const DeviationPair& dev);
EquilibriumProjection project_equilibrium(const MeshProblem& mp, const std::vector<Mat>& p_star,
                                          const DeviationPair& dev);

/// Newton failure; carries the residual history.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

struct ClassicalSolution {
  ElementFields fields;
  std::vector<double> residual_history;  // |r(T(Du))| per Newton iterate
  int iterations = 0;
  double energy = 0.0;
};

/// Damped Newton for div T(Du) + f = 0, u = g_D. Backtracking on the energy
/// with factor 1/2 down to 2^-20. Starts from x + harmonic lift of g_D - x.
ClassicalSolution solve_classical(const MeshProblem& mp, const EnergyModel& m, double newton_tol = 1e-10,
                                  int max_iter = 100);

struct Diagnostics {
  double delta_gap = 0.0;      // sum_e w_e (V(F - F') + V*(P - P'))
  double curl_residual = 0.0;  // sum over interior edges of |l [F'] t|
  double div_residual = 0.0;   // dual norm of r(P') in the stiffness norm
  double duality_gap = 0.0;    // |sum w Du.P - Neumann - body force - Dirichlet reaction pairing|

  friend bool operator==(const Diagnostics&, const Diagnostics&) = default;
};

Diagnostics discrete_diagnostics(const MeshProblem& mp, const ElementFields& fields,
                                 const std::vector<PhasePoint>& data_branch, const DeviationPair& dev);
Diagnostics discrete_diagnostics(const Projector& proj, const ElementFields& fields,
                                 const std::vector<PhasePoint>& data_branch, const DeviationPair& dev);

}  // namespace ddfe
