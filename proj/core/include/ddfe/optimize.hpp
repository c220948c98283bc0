#pragma once

#include <Eigen/Dense>
#include <functional>

namespace ddfe::opt {

using Vec = Eigen::VectorXd;
using Objective = std::function<double(const Vec&)>;
using Gradient = std::function<Vec(const Vec&)>;
using Hessian = std::function<Eigen::MatrixXd(const Vec&)>;

struct Result {
  Vec x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// BFGS with Armijo backtracking; stops when |grad| <= grad_tol.
Result bfgs(const Objective& f, const Gradient& grad, Vec x0, double grad_tol, int max_iter);

/// Newton on |eigenvalue|-modified Hessian with Armijo backtracking.
Result newton(const Objective& f, const Gradient& grad, const Hessian& hess, Vec x0, double grad_tol,
              int max_iter);

/// Central-difference gradient with step h * (1 + |x_i|).
Vec fd_gradient(const Objective& f, const Vec& x, double h = 1e-6);

}  // namespace ddfe::opt
