#include "ddfe/fem.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace ddfe {

// ---------------------------------------------------------------- meshes

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::kLeft;
  if (s == "right") return Side::kRight;
  if (s == "bottom") return Side::kBottom;
  if (s == "top") return Side::kTop;
  throw std::invalid_argument("unknown side '" + s + "' (left, right, bottom, top)");
}

std::string to_string(Side s) {
  switch (s) {
    case Side::kLeft: return "left";
    case Side::kRight: return "right";
    case Side::kBottom: return "bottom";
    case Side::kTop: return "top";
  }
  return "?";
}

Mesh square_mesh(int n, const std::set<Side>& dirichlet_sides) {
  if (n < 1) throw MeshError("square mesh needs N >= 1");
  Mesh m;
  const double h = 1.0 / n;
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) m.nodes.push_back({i * h, j * h});
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({p00, p10, p11});
        m.triangles.push_back({p00, p11, p01});
      } else {
        m.triangles.push_back({p00, p10, p01});
        m.triangles.push_back({p10, p11, p01});
      }
    }
  }
  auto add = [&](Side s, Edge e) {
    (dirichlet_sides.count(s) ? m.dirichlet_edges : m.neumann_edges).push_back(e);
  };
  for (int i = 0; i < n; ++i) add(Side::kBottom, {id(i, 0), id(i + 1, 0)});
  for (int j = 0; j < n; ++j) add(Side::kRight, {id(n, j), id(n, j + 1)});
  for (int i = n; i > 0; --i) add(Side::kTop, {id(i, n), id(i - 1, n)});
  for (int j = n; j > 0; --j) add(Side::kLeft, {id(0, j), id(0, j - 1)});
  return m;
}

BoundaryConditions uniaxial_stretch(double strain) {
  BoundaryConditions bc;
  DirichletSpec left;
  left.edges = {EdgeSelector::Kind::kX, {}, 0.0};
  DirichletSpec right;
  right.edges = {EdgeSelector::Kind::kX, {}, 1.0};
  right.A = Mat::diag({1.0 + strain, 1.0});
  bc.dirichlet = {left, right};
  return bc;
}

BoundaryConditions affine_dirichlet(const Mat& a, const Vec2& b) {
  BoundaryConditions bc;
  bc.dirichlet.push_back({EdgeSelector{}, a, b});
  return bc;
}

namespace {

std::string edge_str(const Edge& e) {
  std::ostringstream os;
  os << "(" << e[0] << "," << e[1] << ")";
  return os.str();
}

std::pair<int, int> key(const Edge& e) { return {std::min(e[0], e[1]), std::max(e[0], e[1])}; }

std::vector<std::size_t> select_edges(const EdgeSelector& sel, const std::vector<Edge>& edges,
                                      const std::vector<Vec2>& nodes, const char* what) {
  std::vector<std::size_t> out;
  switch (sel.kind) {
    case EdgeSelector::Kind::kAll:
      for (std::size_t i = 0; i < edges.size(); ++i) out.push_back(i);
      return out;
    case EdgeSelector::Kind::kList:
      for (int i : sel.indices) {
        if (i < 0 || static_cast<std::size_t>(i) >= edges.size()) {
          throw MeshError(std::string(what) + " edge index " + std::to_string(i) + " out of range");
        }
        out.push_back(static_cast<std::size_t>(i));
      }
      return out;
    case EdgeSelector::Kind::kX:
    case EdgeSelector::Kind::kY: {
      const int c = sel.kind == EdgeSelector::Kind::kX ? 0 : 1;
      const double tol = 1e-12 * (1.0 + std::abs(sel.value));
      for (std::size_t i = 0; i < edges.size(); ++i) {
        if (std::abs(nodes[edges[i][0]][c] - sel.value) <= tol && std::abs(nodes[edges[i][1]][c] - sel.value) <= tol)
          out.push_back(i);
      }
      if (out.empty()) {
        throw MeshError(std::string(what) + " selector " + (c == 0 ? "x" : "y") + " = " +
                        std::to_string(sel.value) + " matches no edge");
      }
      return out;
    }
  }
  return out;
}

}  // namespace

MeshProblem::MeshProblem(Mesh mesh, BoundaryConditions bc) : mesh_(std::move(mesh)), bc_(std::move(bc)) {
  const std::size_t nn = mesh_.nodes.size();
  const std::size_t ne = mesh_.triangles.size();
  if (ne == 0) throw MeshError("mesh has no triangles");
  for (const Vec2& x : mesh_.nodes)
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw MeshError("non-finite node coordinate");

  area_.resize(ne);
  grad_.resize(ne);
  std::map<std::pair<int, int>, std::vector<std::pair<int, Edge>>> edge_map;
  for (std::size_t e = 0; e < ne; ++e) {
    const Triangle& t = mesh_.triangles[e];
    for (int k : t)
      if (k < 0 || static_cast<std::size_t>(k) >= nn)
        throw MeshError("triangle " + std::to_string(e) + " references missing node " + std::to_string(k));
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw MeshError("triangle " + std::to_string(e) + " repeats a node");
    const Vec2 &p0 = mesh_.nodes[t[0]], &p1 = mesh_.nodes[t[1]], &p2 = mesh_.nodes[t[2]];
    const double twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    if (!(twice > 0.0)) throw MeshError("triangle " + std::to_string(e) + " has non-positive area");
    area_[e] = 0.5 * twice;
    grad_[e] = {Vec2{(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice},
                Vec2{(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice},
                Vec2{(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice}};
    for (int k = 0; k < 3; ++k) {
      const Edge oriented{t[k], t[(k + 1) % 3]};
      edge_map[key(oriented)].emplace_back(static_cast<int>(e), oriented);
    }
  }

  std::map<std::pair<int, int>, int> boundary;  // 0 unlabeled, 1 Dirichlet, 2 Neumann
  for (const auto& [k, uses] : edge_map) {
    if (uses.size() > 2) throw MeshError("edge " + edge_str(uses[0].second) + " shared by more than two triangles");
    if (uses.size() == 2) {
      if (uses[0].second[0] != uses[1].second[1] || uses[0].second[1] != uses[1].second[0]) {
        throw MeshError("edge " + edge_str(uses[0].second) + " has inconsistent orientation");
      }
      interior_.push_back({uses[0].second, uses[0].first, uses[1].first});
    } else {
      boundary[k] = 0;
    }
  }
  auto label = [&](const std::vector<Edge>& list, int tag, const char* what) {
    for (const Edge& e : list) {
      auto it = boundary.find(key(e));
      if (it == boundary.end()) throw MeshError(std::string(what) + " edge " + edge_str(e) + " is not a boundary edge");
      if (it->second != 0) throw MeshError("boundary edge " + edge_str(e) + " labeled more than once");
      it->second = tag;
    }
  };
  label(mesh_.dirichlet_edges, 1, "Dirichlet");
  label(mesh_.neumann_edges, 2, "Neumann");
  for (const auto& [k, tag] : boundary)
    if (tag == 0) throw MeshError("boundary edge " + edge_str({k.first, k.second}) + " is unlabeled");
  if (mesh_.dirichlet_edges.empty()) throw MeshError("Dirichlet boundary is empty");

  dirichlet_.assign(nn, false);
  g_d_.resize(nn);
  for (const Edge& e : mesh_.dirichlet_edges) dirichlet_[e[0]] = dirichlet_[e[1]] = true;
  for (std::size_t i = 0; i < nn; ++i) g_d_[i] = mesh_.nodes[i];
  for (const DirichletSpec& s : bc_.dirichlet) {
    if (s.A.dim() != 2) throw MeshError("Dirichlet map must be 2x2");
    for (std::size_t idx : select_edges(s.edges, mesh_.dirichlet_edges, mesh_.nodes, "Dirichlet")) {
      for (int node : mesh_.dirichlet_edges[idx]) {
        const Vec2& x = mesh_.nodes[node];
        g_d_[node] = {s.A(0, 0) * x[0] + s.A(0, 1) * x[1] + s.b[0], s.A(1, 0) * x[0] + s.A(1, 1) * x[1] + s.b[1]};
      }
    }
  }
  for (std::size_t i = 0; i < nn; ++i)
    if (!dirichlet_[i]) g_d_[i] = {0.0, 0.0};

  h_n_.assign(mesh_.neumann_edges.size(), Vec2{});
  for (const NeumannSpec& s : bc_.neumann)
    for (std::size_t idx : select_edges(s.edges, mesh_.neumann_edges, mesh_.nodes, "Neumann")) h_n_[idx] = s.traction;

  if (bc_.body_force.empty()) {
    f_.assign(ne, Vec2{});
  } else if (bc_.body_force.size() == 1) {
    f_.assign(ne, bc_.body_force[0]);
  } else if (bc_.body_force.size() == ne) {
    f_ = bc_.body_force;
  } else {
    throw MeshError("body force needs 0, 1 or " + std::to_string(ne) + " entries, got " +
                    std::to_string(bc_.body_force.size()));
  }

  free_.assign(nn, -1);
  for (std::size_t i = 0; i < nn; ++i)
    if (!dirichlet_[i]) free_[i] = static_cast<int>(free_count_++);
}

// ---------------------------------------------------------------- element fields

Mat element_gradient(const MeshProblem& mp, const std::vector<Vec2>& u, std::size_t e) {
  const Triangle& t = mp.mesh().triangles[e];
  const auto& g = mp.shape_gradients(e);
  Mat d(2);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d(i, j) += u[t[k]][i] * g[k][j];
  return d;
}

std::vector<Mat> element_gradients(const MeshProblem& mp, const std::vector<Vec2>& u) {
  if (u.size() != mp.node_count()) throw std::invalid_argument("nodal field has the wrong size");
  std::vector<Mat> out;
  out.reserve(mp.element_count());
  for (std::size_t e = 0; e < mp.element_count(); ++e) out.push_back(element_gradient(mp, u, e));
  return out;
}

namespace {

// Load vector: sum_e w_e f_e phi_k(centroid) + sum_N int h_N phi_k.
std::vector<Vec2> load_vector(const MeshProblem& mp) {
  std::vector<Vec2> l(mp.node_count(), Vec2{});
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const double w = mp.area(e) / 3.0;
    for (int k : mp.mesh().triangles[e])
      for (int i = 0; i < 2; ++i) l[k][i] += w * mp.body_force(e)[i];
  }
  const auto& edges = mp.mesh().neumann_edges;
  for (std::size_t n = 0; n < edges.size(); ++n) {
    const Vec2 &a = mp.mesh().nodes[edges[n][0]], &b = mp.mesh().nodes[edges[n][1]];
    const double half = 0.5 * std::hypot(b[0] - a[0], b[1] - a[1]);
    for (int node : edges[n])
      for (int i = 0; i < 2; ++i) l[node][i] += half * mp.traction(n)[i];
  }
  return l;
}

void check_states(const MeshProblem& mp, const std::vector<Mat>& s, const char* what) {
  if (s.size() != mp.element_count())
    throw std::invalid_argument(std::string(what) + " needs one state per element");
  for (const Mat& m : s)
    if (m.dim() != 2) throw std::invalid_argument(std::string(what) + " states must be 2x2");
}

void require_quadratic(const DeviationPair& dev) {
  if (!dev.is_quadratic()) throw std::invalid_argument("projections need the quadratic deviation pair");
}

double norm2(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (const Vec2& x : v) s += x[0] * x[0] + x[1] * x[1];
  return std::sqrt(s);
}

}  // namespace

double external_work(const MeshProblem& mp, const std::vector<Vec2>& v) {
  if (v.size() != mp.node_count()) throw std::invalid_argument("nodal field has the wrong size");
  const std::vector<Vec2> l = load_vector(mp);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += l[k][0] * v[k][0] + l[k][1] * v[k][1];
  return s;
}

std::vector<Vec2> equilibrium_residual(const MeshProblem& mp, const std::vector<Mat>& p) {
  check_states(mp, p, "equilibrium residual");
  std::vector<Vec2> r = load_vector(mp);
  for (Vec2& x : r) x = {-x[0], -x[1]};
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const auto& g = mp.shape_gradients(e);
    const double w = mp.area(e);
    const Triangle& t = mp.mesh().triangles[e];
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 2; ++i) r[t[k]][i] += w * (p[e](i, 0) * g[k][0] + p[e](i, 1) * g[k][1]);
  }
  return r;
}

double equilibrium_residual_norm(const MeshProblem& mp, const std::vector<Mat>& p) {
  const std::vector<Vec2> r = equilibrium_residual(mp, p);
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (!mp.is_dirichlet(k)) s += r[k][0] * r[k][0] + r[k][1] * r[k][1];
  return std::sqrt(s);
}

double l2_norm(const MeshProblem& mp, const std::vector<Vec2>& u) {
  if (u.size() != mp.node_count()) throw std::invalid_argument("nodal field has the wrong size");
  double s = 0.0;
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const Triangle& t = mp.mesh().triangles[e];
    double sq = 0.0;
    Vec2 sum{};
    for (int k : t) {
      sq += u[k][0] * u[k][0] + u[k][1] * u[k][1];
      sum[0] += u[k][0];
      sum[1] += u[k][1];
    }
    s += mp.area(e) / 12.0 * (sq + sum[0] * sum[0] + sum[1] * sum[1]);
  }
  return std::sqrt(s);
}

double total_energy(const MeshProblem& mp, const EnergyModel& m, const std::vector<Vec2>& u) {
  if (m.dim() != 2) throw std::invalid_argument("finite elements need a 2D energy model");
  double s = 0.0;
  for (std::size_t e = 0; e < mp.element_count(); ++e) s += mp.area(e) * energy(m, element_gradient(mp, u, e));
  return s - external_work(mp, u);
}

// ---------------------------------------------------------------- projections

struct Projector::Impl {
  Eigen::SparseMatrix<double> k;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

Projector::Projector(const MeshProblem& mp) : mp_(&mp), impl_(std::make_unique<Impl>()) {
  const auto nf = static_cast<Eigen::Index>(mp.free_count());
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const auto& g = mp.shape_gradients(e);
    const Triangle& t = mp.mesh().triangles[e];
    for (int a = 0; a < 3; ++a) {
      const int fa = mp.free_index(t[a]);
      if (fa < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int fb = mp.free_index(t[b]);
        if (fb < 0) continue;
        trip.emplace_back(fa, fb, mp.area(e) * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
      }
    }
  }
  impl_->k.resize(nf, nf);
  impl_->k.setFromTriplets(trip.begin(), trip.end());
  if (nf > 0) {
    impl_->ldlt.compute(impl_->k);
    if (impl_->ldlt.info() != Eigen::Success) throw std::runtime_error("singular stiffness (degenerate mesh)");
    const auto d = impl_->ldlt.vectorD();
    if ((d.array() <= 0.0).any()) throw std::runtime_error("singular stiffness (degenerate mesh)");
  }
}

Projector::~Projector() = default;
Projector::Projector(Projector&&) noexcept = default;
Projector& Projector::operator=(Projector&&) noexcept = default;

std::vector<Vec2> Projector::solve(const std::vector<Vec2>& rhs, double* relative_residual) const {
  const auto nf = static_cast<Eigen::Index>(mp_->free_count());
  if (static_cast<Eigen::Index>(rhs.size()) != nf) throw std::invalid_argument("right-hand side has the wrong size");
  std::vector<Vec2> out(rhs.size(), Vec2{});
  if (relative_residual) *relative_residual = 0.0;
  if (nf == 0) return out;
  Eigen::MatrixXd b(nf, 2);
  for (Eigen::Index i = 0; i < nf; ++i) b.row(i) << rhs[i][0], rhs[i][1];
  const double bn = b.norm();
  if (bn == 0.0) return out;
  Eigen::MatrixXd x = impl_->ldlt.solve(b);
  double rel = (b - impl_->k * x).norm() / bn;
  for (int step = 0; step < 3 && rel > 1e-15; ++step) {
    const Eigen::MatrixXd dx = impl_->ldlt.solve(b - impl_->k * x);
    const Eigen::MatrixXd y = x + dx;
    const double r2 = (b - impl_->k * y).norm() / bn;
    if (!(r2 < rel)) break;
    x = y;
    rel = r2;
  }
  if (!x.allFinite()) throw std::runtime_error("linear solve produced non-finite values");
  for (Eigen::Index i = 0; i < nf; ++i) out[i] = {x(i, 0), x(i, 1)};
  if (relative_residual) *relative_residual = rel;
  return out;
}

CompatibleProjection Projector::project_compatible(const std::vector<Mat>& f_star, const DeviationPair& dev) const {
  require_quadratic(dev);
  const MeshProblem& mp = *mp_;
  check_states(mp, f_star, "compatible projection");
  std::vector<Vec2> rhs(mp.free_count(), Vec2{});
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const auto& g = mp.shape_gradients(e);
    const Triangle& t = mp.mesh().triangles[e];
    const double w = mp.area(e);
    for (int a = 0; a < 3; ++a) {
      const int fa = mp.free_index(t[a]);
      if (fa < 0) continue;
      for (int i = 0; i < 2; ++i) rhs[fa][i] += w * (f_star[e](i, 0) * g[a][0] + f_star[e](i, 1) * g[a][1]);
      for (int b = 0; b < 3; ++b) {
        if (mp.free_index(t[b]) >= 0) continue;
        const double kab = w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        for (int i = 0; i < 2; ++i) rhs[fa][i] -= kab * mp.g_D(t[b])[i];
      }
    }
  }
  const std::vector<Vec2> x = solve(rhs);
  CompatibleProjection out;
  out.u.resize(mp.node_count());
  for (std::size_t k = 0; k < mp.node_count(); ++k) out.u[k] = mp.is_dirichlet(k) ? mp.g_D(k) : x[mp.free_index(k)];
  out.F = element_gradients(mp, out.u);

  // Optimality: sum_e w_e (Du_e - F*_e) Dphi_a = 0 at free nodes, relative to both parts.
  std::vector<Vec2> gu(mp.free_count(), Vec2{}), gf(mp.free_count(), Vec2{});
  for (std::size_t e = 0; e < mp.element_count(); ++e) {
    const auto& g = mp.shape_gradients(e);
    const Triangle& t = mp.mesh().triangles[e];
    for (int a = 0; a < 3; ++a) {
      const int fa = mp.free_index(t[a]);
      if (fa < 0) continue;
      for (int i = 0; i < 2; ++i) {
        gu[fa][i] += mp.area(e) * (out.F[e](i, 0) * g[a][0] + out.F[e](i, 1) * g[a][1]);
        gf[fa][i] += mp.area(e) * (f_star[e](i, 0) * g[a][0] + f_star[e](i, 1) * g[a][1]);
      }
    }
  }
  std::vector<Vec2> diff(gu.size());
  for (std::size_t i = 0; i < gu.size(); ++i) diff[i] = {gu[i][0] - gf[i][0], gu[i][1] - gf[i][1]};
  const double den = norm2(gu) + norm2(gf);
  out.residual = den > 0.0 ? norm2(diff) / den : 0.0;
  return out;
}

EquilibriumProjection Projector::project_equilibrium(const std::vector<Mat>& p_star, const DeviationPair& dev) const {
  require_quadratic(dev);
  const MeshProblem& mp = *mp_;
  check_states(mp, p_star, "equilibrium projection");
  // P = P* + C D(lambda); the constraint gives C K lambda = -r(P*).
  const std::vector<Vec2> r = equilibrium_residual(mp, p_star);
  std::vector<Vec2> rhs(mp.free_count());
  for (std::size_t k = 0; k < mp.node_count(); ++k)
    if (const int f = mp.free_index(k); f >= 0) rhs[f] = {-r[k][0], -r[k][1]};
  const std::vector<Vec2> mu = solve(rhs);
  const double c = dev.modulus();
  EquilibriumProjection out;
  std::vector<Vec2> mu_nodes(mp.node_count(), Vec2{});
  out.lambda.assign(mp.node_count(), Vec2{});
  for (std::size_t k = 0; k < mp.node_count(); ++k) {
    if (const int f = mp.free_index(k); f >= 0) {
      mu_nodes[k] = mu[f];
      out.lambda[k] = {mu[f][0] / c, mu[f][1] / c};
    }
  }
  out.P.reserve(mp.element_count());
  for (std::size_t e = 0; e < mp.element_count(); ++e) out.P.push_back(p_star[e] + element_gradient(mp, mu_nodes, e));
  out.residual = equilibrium_residual_norm(mp, out.P);
  return out;
}

double Projector::dual_norm(const std::vector<Vec2>& residual) const {
  const std::vector<Vec2> x = solve(residual);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += residual[i][0] * x[i][0] + residual[i][1] * x[i][1];
  return std::sqrt(std::max(0.0, s));
}

CompatibleProjection project_compatible(const MeshProblem& mp, const std::vector<Mat>& f_star,
                                        const DeviationPair& dev) {
  return Projector(mp).project_compatible(f_star, dev);
}

EquilibriumProjection project_equilibrium(const MeshProblem& mp, const std::vector<Mat>& p_star,
                                          const DeviationPair& dev) {
  return Projector(mp).project_equilibrium(p_star, dev);
}

// ---------------------------------------------------------------- classical Newton

ClassicalSolution solve_classical(const MeshProblem& mp, const EnergyModel& m, double newton_tol, int max_iter) {
  if (m.dim() != 2) throw std::invalid_argument("classical solve needs a 2D energy model");
  if (!(newton_tol > 0.0) || max_iter < 1) throw std::invalid_argument("classical solve needs tol > 0, max_iter >= 1");
  const Projector proj(mp);
  const std::size_t nn = mp.node_count();
  const std::size_t nf = mp.free_count();

  // Start: reference placement plus the harmonic lift of the boundary displacement.
  std::vector<Vec2> u(nn);
  {
    std::vector<Vec2> rhs(nf, Vec2{});
    for (std::size_t e = 0; e < mp.element_count(); ++e) {
      const auto& g = mp.shape_gradients(e);
      const Triangle& t = mp.mesh().triangles[e];
      for (int a = 0; a < 3; ++a) {
        const int fa = mp.free_index(t[a]);
        if (fa < 0) continue;
        for (int b = 0; b < 3; ++b) {
          if (mp.free_index(t[b]) >= 0) continue;
          const double kab = mp.area(e) * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
          for (int i = 0; i < 2; ++i) rhs[fa][i] -= kab * (mp.g_D(t[b])[i] - mp.mesh().nodes[t[b]][i]);
        }
      }
    }
    const std::vector<Vec2> w = proj.solve(rhs);
    for (std::size_t k = 0; k < nn; ++k) {
      const int f = mp.free_index(k);
      u[k] = f < 0 ? mp.g_D(k) : Vec2{mp.mesh().nodes[k][0] + w[f][0], mp.mesh().nodes[k][1] + w[f][1]};
    }
  }

  auto free_residual = [&](const std::vector<Vec2>& uu, std::vector<Mat>* p_out) {
    std::vector<Mat> p;
    p.reserve(mp.element_count());
    for (std::size_t e = 0; e < mp.element_count(); ++e) p.push_back(stress(m, element_gradient(mp, uu, e)));
    const std::vector<Vec2> r = equilibrium_residual(mp, p);
    Eigen::VectorXd rf(2 * static_cast<Eigen::Index>(nf));
    for (std::size_t k = 0; k < nn; ++k)
      if (const int f = mp.free_index(k); f >= 0) rf.segment<2>(2 * f) << r[k][0], r[k][1];
    if (p_out) *p_out = std::move(p);
    return rf;
  };

  ClassicalSolution sol;
  std::vector<Mat> p;
  Eigen::VectorXd r = free_residual(u, &p);
  double energy_now = total_energy(mp, m, u);
  for (int it = 0;; ++it) {
    const double rn = r.norm();
    sol.residual_history.push_back(rn);
    if (!std::isfinite(rn)) throw SolverError("classical solve: non-finite residual", sol.residual_history);
    if (rn <= newton_tol) {
      sol.iterations = it;
      break;
    }
    if (it >= max_iter) {
      throw SolverError("classical solve: no convergence after " + std::to_string(max_iter) + " iterations",
                        sol.residual_history);
    }

    // Tangent on free dofs.
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t e = 0; e < mp.element_count(); ++e) {
      const auto& g = mp.shape_gradients(e);
      const Triangle& t = mp.mesh().triangles[e];
      const Mat f = element_gradient(mp, u, e);
      for (int b = 0; b < 3; ++b) {
        const int fb = mp.free_index(t[b]);
        if (fb < 0) continue;
        for (int j = 0; j < 2; ++j) {
          Mat h(2);
          h(j, 0) = g[b][0];
          h(j, 1) = g[b][1];
          const Mat dt = stress_tangent(m, f, h);
          for (int a = 0; a < 3; ++a) {
            const int fa = mp.free_index(t[a]);
            if (fa < 0) continue;
            for (int i = 0; i < 2; ++i)
              trip.emplace_back(2 * fa + i, 2 * fb + j, mp.area(e) * (dt(i, 0) * g[a][0] + dt(i, 1) * g[a][1]));
          }
        }
      }
    }
    const auto n2 = static_cast<Eigen::Index>(2 * nf);
    Eigen::SparseMatrix<double> kt(n2, n2);
    kt.setFromTriplets(trip.begin(), trip.end());
    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < n2; ++i) max_diag = std::max(max_diag, std::abs(kt.coeff(i, i)));

    // Newton direction, shifted towards gradient descent when the tangent is not positive.
    Eigen::VectorXd delta;
    double shift = 0.0;
    for (int attempt = 0; attempt < 24; ++attempt) {
      Eigen::SparseMatrix<double> a = kt;
      if (shift > 0.0)
        for (Eigen::Index i = 0; i < n2; ++i) a.coeffRef(i, i) += shift;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        delta = -ldlt.solve(r);
        if (delta.allFinite() && r.dot(delta) < 0.0) break;
      }
      delta.resize(0);
      shift = shift == 0.0 ? 1e-8 * (1.0 + max_diag) : 10.0 * shift;
    }
    if (delta.size() == 0) throw SolverError("classical solve: singular tangent", sol.residual_history);

    const double slope = r.dot(delta);
    auto trial = [&](double step) {
      std::vector<Vec2> v = u;
      for (std::size_t k = 0; k < nn; ++k)
        if (const int f = mp.free_index(k); f >= 0) {
          v[k][0] += step * delta[2 * f];
          v[k][1] += step * delta[2 * f + 1];
        }
      return v;
    };
    bool accepted = false;
    for (double step = 1.0; step >= std::ldexp(1.0, -20); step *= 0.5) {
      std::vector<Vec2> v = trial(step);
      const double e1 = total_energy(mp, m, v);
      bool ok = std::isfinite(e1) && e1 <= energy_now + 1e-4 * step * slope;
      Eigen::VectorXd r1;
      std::vector<Mat> p1;
      if (!ok && std::isfinite(e1) && e1 <= energy_now + 1e-13 * (1.0 + std::abs(energy_now))) {
        // Energy changes below rounding: accept on residual decrease.
        r1 = free_residual(v, &p1);
        ok = r1.norm() < rn;
      }
      if (ok) {
        if (r1.size() == 0) r1 = free_residual(v, &p1);
        u = std::move(v);
        r = std::move(r1);
        p = std::move(p1);
        energy_now = e1;
        accepted = true;
        break;
      }
    }
    if (!accepted) throw SolverError("classical solve: line search failed", sol.residual_history);
  }

  sol.fields.u = u;
  sol.fields.F = element_gradients(mp, u);
  sol.fields.P = std::move(p);
  sol.fields.lambda.assign(nn, Vec2{});
  sol.fields.compatible = true;
  sol.fields.equilibrated = true;
  sol.energy = energy_now;
  return sol;
}

// ---------------------------------------------------------------- diagnostics

Diagnostics discrete_diagnostics(const Projector& proj, const ElementFields& fields,
                                 const std::vector<PhasePoint>& data_branch, const DeviationPair& dev) {
  const MeshProblem& mp = proj.problem();
  const std::size_t ne = mp.element_count();
  if (fields.F.size() != ne || fields.P.size() != ne || data_branch.size() != ne || fields.u.size() != mp.node_count())
    throw std::invalid_argument("diagnostics need populated fields and one data state per element");
  Diagnostics d;
  for (std::size_t e = 0; e < ne; ++e) d.delta_gap += mp.area(e) * dev.deviation({fields.F[e], fields.P[e]}, data_branch[e]);

  for (const auto& ie : mp.interior_edges()) {
    const Vec2 &a = mp.mesh().nodes[ie.nodes[0]], &b = mp.mesh().nodes[ie.nodes[1]];
    const Mat jump = data_branch[ie.e0].F - data_branch[ie.e1].F;
    const double tx = b[0] - a[0], ty = b[1] - a[1];
    d.curl_residual += std::hypot(jump(0, 0) * tx + jump(0, 1) * ty, jump(1, 0) * tx + jump(1, 1) * ty);
  }

  std::vector<Mat> p_data;
  p_data.reserve(ne);
  for (const PhasePoint& z : data_branch) p_data.push_back(z.P);
  const std::vector<Vec2> r_data = equilibrium_residual(mp, p_data);
  std::vector<Vec2> r_free(mp.free_count());
  for (std::size_t k = 0; k < mp.node_count(); ++k)
    if (const int f = mp.free_index(k); f >= 0) r_free[f] = r_data[k];
  d.div_residual = proj.dual_norm(r_free);

  // Duality: interior work minus Neumann, body-force and Dirichlet reaction pairings.
  double work = 0.0;
  for (std::size_t e = 0; e < ne; ++e) work += mp.area(e) * dot(element_gradient(mp, fields.u, e), fields.P[e]);
  const std::vector<Vec2> r = equilibrium_residual(mp, fields.P);
  double reaction = 0.0;
  for (std::size_t k = 0; k < mp.node_count(); ++k)
    if (mp.is_dirichlet(k)) reaction += r[k][0] * fields.u[k][0] + r[k][1] * fields.u[k][1];
  d.duality_gap = std::abs(work - external_work(mp, fields.u) - reaction);
  return d;
}

Diagnostics discrete_diagnostics(const MeshProblem& mp, const ElementFields& fields,
                                 const std::vector<PhasePoint>& data_branch, const DeviationPair& dev) {
  return discrete_diagnostics(Projector(mp), fields, data_branch, dev);
}

}  // namespace ddfe
