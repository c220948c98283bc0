#include "ddfe/material_models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddfe/optimize.hpp"

namespace ddfe {

// ---------------------------------------------------------------- g(t)

ConvexScalarG ConvexScalarG::quadratic(double beta, double t0) {
  if (!(beta >= 0.0) || !std::isfinite(beta) || !std::isfinite(t0)) {
    throw std::invalid_argument("quadratic g needs finite beta >= 0 and finite t0");
  }
  ConvexScalarG g;
  g.form_ = Form::kQuadratic;
  g.beta_ = beta;
  g.t0_ = t0;
  g.b_ = beta * std::abs(t0);
  g.d_ = beta;
  return g;
}

ConvexScalarG ConvexScalarG::table(std::vector<double> knots, std::vector<double> slopes, double value0) {
  if (knots.size() < 2 || knots.size() != slopes.size()) {
    throw std::invalid_argument("tabulated g needs at least two knots and one slope per knot");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw std::invalid_argument("tabulated g knots must increase strictly");
    if (slopes[i] < slopes[i - 1]) throw std::invalid_argument("tabulated g' must be non-decreasing (g convex)");
  }
  ConvexScalarG g;
  g.form_ = Form::kTable;
  g.knots_ = std::move(knots);
  g.slopes_ = std::move(slopes);
  g.value0_ = value0;
  g.knot_values_.assign(g.knots_.size(), value0);
  for (std::size_t i = 1; i < g.knots_.size(); ++i) {
    const double h = g.knots_[i] - g.knots_[i - 1];
    g.knot_values_[i] = g.knot_values_[i - 1] + 0.5 * (g.slopes_[i] + g.slopes_[i - 1]) * h;
  }
  const std::size_t k = g.knots_.size();
  const double m_first = (g.slopes_[1] - g.slopes_[0]) / (g.knots_[1] - g.knots_[0]);
  const double m_last = (g.slopes_[k - 1] - g.slopes_[k - 2]) / (g.knots_[k - 1] - g.knots_[k - 2]);
  g.d_ = std::max(m_first, m_last);
  // |g'| - d|t| is convex on each piece between knots and 0, so its max sits at one of them.
  double b = std::abs(g.derivative(0.0));
  for (double t : g.knots_) b = std::max(b, std::abs(g.derivative(t)) - g.d_ * std::abs(t));
  g.b_ = std::max(b, 0.0);
  return g;
}

namespace {

// Segment index for t, clamped so that the end segments extrapolate.
std::size_t segment(const std::vector<double>& knots, double t) {
  const auto it = std::upper_bound(knots.begin(), knots.end(), t);
  std::size_t i = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
  return std::min(i, knots.size() - 2);
}

}  // namespace

double ConvexScalarG::value(double t) const {
  if (form_ == Form::kQuadratic) return 0.5 * beta_ * (t - t0_) * (t - t0_);
  const std::size_t i = segment(knots_, t);
  const double m = (slopes_[i + 1] - slopes_[i]) / (knots_[i + 1] - knots_[i]);
  const double s = t - knots_[i];
  return knot_values_[i] + slopes_[i] * s + 0.5 * m * s * s;
}

double ConvexScalarG::derivative(double t) const {
  if (form_ == Form::kQuadratic) return beta_ * (t - t0_);
  const std::size_t i = segment(knots_, t);
  const double m = (slopes_[i + 1] - slopes_[i]) / (knots_[i + 1] - knots_[i]);
  return slopes_[i] + m * (t - knots_[i]);
}

double ConvexScalarG::second_derivative(double) const {
  if (form_ != Form::kQuadratic) throw std::logic_error("tabulated g has no analytic second derivative");
  return beta_;
}

// ---------------------------------------------------------------- models

std::string to_string(Flavor f) {
  switch (f) {
    case Flavor::kW2: return "W2";
    case Flavor::kW3: return "W3";
    case Flavor::kHatW2: return "hatW2";
    case Flavor::kHatW3: return "hatW3";
  }
  return "?";
}

Flavor flavor_from_string(const std::string& s) {
  if (s == "W2") return Flavor::kW2;
  if (s == "W3") return Flavor::kW3;
  if (s == "hatW2") return Flavor::kHatW2;
  if (s == "hatW3") return Flavor::kHatW3;
  throw std::invalid_argument("unknown model flavor '" + s + "' (expected W2, W3, hatW2, hatW3)");
}

EnergyModel::EnergyModel(Flavor flavor, int n, double a, double e, ConvexScalarG g)
    : flavor_(flavor), n_(n), a_(a), e_(e), g_(std::move(g)) {
  if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("quartic coefficient a must be finite and >= 0");
  if (!std::isfinite(e) || e < 0.0) throw std::invalid_argument("sextic coefficient e must be finite and >= 0");
  const double b = g_.growth_b();
  const double d = g_.growth_d();
  if (n_ == 2) {
    flags_.coercivity = a_ > 0.0 && b > 0.0 && d < 2.0 * a_;
    flags_.polymonotone_2d = a_ > 0.0 && b <= 2.0 && d <= 3.0 * a_;
    flags_.polymonotone_boundary_case = std::abs(b - 2.0) <= 1e-14;
    flags_.closedness_window_2d =
        flavor_ == Flavor::kHatW2 && a_ > 0.0 && a_ <= 0.25 && g_.beta() > 0.0 && g_.beta() < 2.0 * a_;
  } else {
    flags_.coercivity = e_ > 0.0 && b > 0.0 && d < 3.0 * e_;
  }
}

EnergyModel EnergyModel::w2(double a, ConvexScalarG g) { return {Flavor::kW2, 2, a, 0.0, std::move(g)}; }

EnergyModel EnergyModel::w3(double a, double e, ConvexScalarG g) {
  if (!(e > 0.0)) throw std::invalid_argument("W3 needs e > 0");
  return {Flavor::kW3, 3, a, e, std::move(g)};
}

EnergyModel EnergyModel::hat_w2(double a, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("hatW2 needs beta > 0");
  return {Flavor::kHatW2, 2, a, 0.0, ConvexScalarG::quadratic(beta, 1.0 + (1.0 + 2.0 * a) / beta)};
}

EnergyModel EnergyModel::hat_w3(double a, double e, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("hatW3 needs beta > 0");
  if (!(e > 0.0)) throw std::invalid_argument("hatW3 needs e > 0");
  return {Flavor::kHatW3, 3, a, e, ConvexScalarG::quadratic(beta, 1.0 + (1.0 + 3.0 * a + 9.0 * e) / beta)};
}

double EnergyModel::closed_form_minimum() const {
  const double beta = g_.beta();
  if (flavor_ == Flavor::kHatW2) return 1.0 + a_ + (1.0 + 2.0 * a_) * (1.0 + 2.0 * a_) / (2.0 * beta);
  if (flavor_ == Flavor::kHatW3) {
    const double k = 1.0 + 3.0 * a_ + 9.0 * e_;
    return 1.5 + 2.25 * a_ + 4.5 * e_ + k * k / (2.0 * beta);
  }
  throw std::logic_error("closed-form minimum is only known for hatW2 and hatW3");
}

namespace {

void check_model_dim(const EnergyModel& m, const Mat& xi) {
  if (xi.dim() != m.dim()) {
    throw std::invalid_argument("model " + to_string(m.flavor()) + " is " + std::to_string(m.dim()) +
                                "D, argument is " + std::to_string(xi.dim()) + "D");
  }
}

}  // namespace

double energy(const EnergyModel& m, const Mat& xi) {
  check_model_dim(m, xi);
  const double r2 = norm_sq(xi);
  return 0.5 * r2 + 0.25 * m.a() * r2 * r2 + m.e() * r2 * r2 * r2 / 6.0 + m.g().value(det(xi));
}

Mat stress(const EnergyModel& m, const Mat& xi) {
  check_model_dim(m, xi);
  const double r2 = norm_sq(xi);
  return xi * (1.0 + m.a() * r2 + m.e() * r2 * r2) + cof(xi) * m.g().derivative(det(xi));
}

Mat stress_tangent(const EnergyModel& m, const Mat& xi, const Mat& h) {
  check_model_dim(m, xi);
  check_model_dim(m, h);
  if (m.g().has_second_derivative()) {
    const double r2 = norm_sq(xi);
    const double xh = dot(xi, h);
    const Mat c = cof(xi);
    const double dj = det(xi);
    // cof is quadratic, so its derivative is the exact central difference.
    const Mat dcof = m.dim() == 2 ? cof(h) : 0.5 * (cof(xi + h) - cof(xi - h));
    return h + m.a() * (2.0 * xh * xi + r2 * h) + m.e() * (4.0 * r2 * xh * xi + r2 * r2 * h) +
           m.g().second_derivative(dj) * dot(c, h) * c + m.g().derivative(dj) * dcof;
  }
  const double hn = norm(h);
  if (hn == 0.0) return Mat(m.dim());
  const double step = 1e-6 * (1.0 + norm(xi)) / hn;
  return (stress(m, xi + step * h) - stress(m, xi - step * h)) / (2.0 * step);
}

StressFunction stress_function(const EnergyModel& m) {
  return {m.dim(), [m](const Mat& f) { return stress(m, f); }};
}

EnergyMinimum minimize_energy(const EnergyModel& m, const Mat& start, double grad_tol, int max_iter) {
  const int n = m.dim();
  const int k = n * n;
  auto to_mat = [n](const opt::Vec& x) { return Mat(n, std::span<const double>(x.data(), x.size())); };
  auto to_vec = [k](const Mat& a) {
    opt::Vec v(k);
    for (int i = 0; i < k; ++i) v[i] = a[i];
    return v;
  };
  auto f = [&](const opt::Vec& x) { return energy(m, to_mat(x)); };
  auto g = [&](const opt::Vec& x) { return to_vec(stress(m, to_mat(x))); };
  auto h = [&](const opt::Vec& x) {
    const Mat xi = to_mat(x);
    Eigen::MatrixXd hess(k, k);
    for (int j = 0; j < k; ++j) {
      Mat e(n);
      e[j] = 1.0;
      hess.col(j) = to_vec(stress_tangent(m, xi, e));
    }
    return Eigen::MatrixXd(0.5 * (hess + hess.transpose()));
  };
  const opt::Result r = opt::newton(f, g, h, to_vec(start), grad_tol, max_iter);
  return {to_mat(r.x), r.value, r.gradient_norm, r.iterations};
}

}  // namespace ddfe
