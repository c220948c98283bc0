#include "ddfe/optimize.hpp"

#include <cmath>

namespace ddfe::opt {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

// Backtracking along d; returns the accepted step or 0 if none decreases f.
double backtrack(const Objective& f, const Vec& x, double fx, const Vec& g, const Vec& d, double& f_new) {
  const double slope = g.dot(d);
  double t = 1.0;
  for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
    f_new = f(x + t * d);
    if (std::isfinite(f_new) && f_new <= fx + kArmijo * t * slope) return t;
  }
  return 0.0;
}

}  // namespace

Result bfgs(const Objective& f, const Gradient& grad, Vec x0, double grad_tol, int max_iter) {
  const Eigen::Index k = x0.size();
  Result r;
  r.x = std::move(x0);
  r.value = f(r.x);
  Vec g = grad(r.x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(k, k);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    r.gradient_norm = g.norm();
    if (r.gradient_norm <= grad_tol) {
      r.converged = true;
      return r;
    }
    Vec d = -hinv * g;
    if (g.dot(d) >= 0.0) {
      hinv.setIdentity();
      d = -g;
    }
    double f_new = r.value;
    double t = backtrack(f, r.x, r.value, g, d, f_new);
    if (t == 0.0) {
      if (hinv.isIdentity()) break;
      hinv.setIdentity();
      continue;
    }
    const Vec s = t * d;
    r.x += s;
    r.value = f_new;
    Vec g_new = grad(r.x);
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
      hinv = (id - rho * s * y.transpose()) * hinv * (id - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    g = std::move(g_new);
  }
  r.gradient_norm = g.norm();
  r.converged = r.gradient_norm <= grad_tol;
  return r;
}

Result newton(const Objective& f, const Gradient& grad, const Hessian& hess, Vec x0, double grad_tol,
              int max_iter) {
  Result r;
  r.x = std::move(x0);
  r.value = f(r.x);
  Vec g = grad(r.x);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    r.gradient_norm = g.norm();
    if (r.gradient_norm <= grad_tol) {
      r.converged = true;
      return r;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess(r.x));
    Vec lambda = eig.eigenvalues().cwiseAbs();
    const double floor = 1e-8 * (1.0 + lambda.maxCoeff());
    lambda = lambda.cwiseMax(floor);
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Vec d = -(v * (v.transpose() * g).cwiseQuotient(lambda));
    double f_new = r.value;
    const double t = backtrack(f, r.x, r.value, g, d, f_new);
    if (t == 0.0) {
      // Objective is flat to rounding; accept a full step only if it shrinks the gradient.
      const Vec x_try = r.x + d;
      Vec g_try = grad(x_try);
      if (g_try.norm() < r.gradient_norm) {
        r.x = x_try;
        r.value = f(r.x);
        g = std::move(g_try);
        continue;
      }
      break;
    }
    r.x += t * d;
    r.value = f_new;
    g = grad(r.x);
  }
  r.gradient_norm = g.norm();
  r.converged = r.gradient_norm <= grad_tol;
  return r;
}

Vec fd_gradient(const Objective& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace ddfe::opt
