#include "ddfe/material_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ddfe/optimize.hpp"
#include "ddfe/random.hpp"

namespace ddfe {

// ---------------------------------------------------------------- deviation pair

DeviationPair DeviationPair::quadratic(double modulus) {
  if (!(modulus > 0.0) || !std::isfinite(modulus)) throw std::invalid_argument("deviation modulus C must be > 0");
  DeviationPair d;
  d.form_ = Form::kQuadratic;
  d.modulus_ = modulus;
  return d;
}

DeviationPair DeviationPair::power(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("deviation exponent p must be > 1");
  DeviationPair d;
  d.form_ = Form::kPower;
  d.p_ = p;
  d.q_ = p / (p - 1.0);
  return d;
}

double DeviationPair::c_p() const noexcept { return is_quadratic() ? 0.5 * modulus_ : 1.0 / p_; }
double DeviationPair::c_q() const noexcept { return is_quadratic() ? 0.5 / modulus_ : 1.0 / q_; }

double DeviationPair::V(const Mat& xi) const {
  if (is_quadratic()) return 0.5 * modulus_ * norm_sq(xi);
  return std::pow(norm(xi), p_) / p_;
}

double DeviationPair::V_star(const Mat& eta) const {
  if (is_quadratic()) return 0.5 * norm_sq(eta) / modulus_;
  return std::pow(norm(eta), q_) / q_;
}

Mat DeviationPair::grad_V(const Mat& xi) const {
  if (is_quadratic()) return modulus_ * xi;
  const double r = norm(xi);
  return r == 0.0 ? Mat(xi.dim()) : std::pow(r, p_ - 2.0) * xi;
}

Mat DeviationPair::grad_V_star(const Mat& eta) const {
  if (is_quadratic()) return eta / modulus_;
  const double r = norm(eta);
  return r == 0.0 ? Mat(eta.dim()) : std::pow(r, q_ - 2.0) * eta;
}

SamplingBox SamplingBox::around(const Mat& center, double half_width) {
  Mat w(center.dim());
  for (int k = 0; k < w.size(); ++k) w[k] = half_width;
  return {center, w};
}

// ---------------------------------------------------------------- data set

LocalDataSet LocalDataSet::graph(const EnergyModel& m, double perturbation_scale) {
  LocalDataSet d = graph(stress_function(m), perturbation_scale);
  d.meta_.model = m;
  return d;
}

LocalDataSet LocalDataSet::graph(StressFunction t, double perturbation_scale) {
  if (!t.eval) throw std::invalid_argument("graph data set needs a stress function");
  LocalDataSet d;
  d.kind_ = Kind::kGraph;
  d.n_ = t.dim;
  d.stress_ = std::move(t);
  d.perturbation_scale_ = perturbation_scale;
  d.meta_.source = "graph";
  return d;
}

LocalDataSet LocalDataSet::cloud(int n, std::vector<PhasePoint> points, DataSetMetadata meta) {
  if (n != 2 && n != 3) throw std::invalid_argument("data set dimension must be 2 or 3");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PhasePoint& z = points[i];
    if (z.F.dim() != n || z.P.dim() != n) {
      throw std::invalid_argument("data point " + std::to_string(i) + " has the wrong dimension");
    }
    if (!all_finite(z.F) || !all_finite(z.P)) {
      throw std::invalid_argument("data point " + std::to_string(i) + " is not finite");
    }
  }
  LocalDataSet d;
  d.kind_ = Kind::kCloud;
  d.n_ = n;
  d.points_ = std::move(points);
  d.meta_ = std::move(meta);
  if (d.meta_.base_count == 0) d.meta_.base_count = d.points_.size() / static_cast<std::size_t>(d.meta_.m_rot);
  return d;
}

LocalDataSet::LocalDataSet(const LocalDataSet& o)
    : kind_(o.kind_), n_(o.n_), points_(o.points_), stress_(o.stress_),
      perturbation_scale_(o.perturbation_scale_), meta_(o.meta_) {
  std::lock_guard lock(o.index_mutex_);
  index_ = o.index_;
  index_modulus_ = o.index_modulus_;
}

LocalDataSet& LocalDataSet::operator=(const LocalDataSet& o) {
  if (this == &o) return *this;
  LocalDataSet tmp(o);
  *this = std::move(tmp);
  return *this;
}

LocalDataSet::LocalDataSet(LocalDataSet&& o) noexcept
    : kind_(o.kind_), n_(o.n_), points_(std::move(o.points_)), stress_(std::move(o.stress_)),
      perturbation_scale_(o.perturbation_scale_), meta_(std::move(o.meta_)), index_(std::move(o.index_)),
      index_modulus_(o.index_modulus_) {}

LocalDataSet& LocalDataSet::operator=(LocalDataSet&& o) noexcept {
  kind_ = o.kind_;
  n_ = o.n_;
  points_ = std::move(o.points_);
  stress_ = std::move(o.stress_);
  perturbation_scale_ = o.perturbation_scale_;
  meta_ = std::move(o.meta_);
  index_ = std::move(o.index_);
  index_modulus_ = o.index_modulus_;
  return *this;
}

LocalDataSet::~LocalDataSet() = default;

const StressFunction& LocalDataSet::stress() const {
  if (!stress_) throw std::logic_error("cloud data set has no stress function");
  return *stress_;
}

Mat LocalDataSet::stress_tangent(const Mat& f, const Mat& h) const {
  if (meta_.model) return ddfe::stress_tangent(*meta_.model, f, h);
  const double hn = norm(h);
  if (hn == 0.0) return Mat(f.dim());
  const double step = 1e-6 * (1.0 + norm(f)) / hn;
  const StressFunction& t = stress();
  return (t(f + step * h) - t(f - step * h)) / (2.0 * step);
}

std::vector<double> embed(const PhasePoint& z, double modulus) {
  const double s = std::sqrt(modulus);
  std::vector<double> x;
  x.reserve(2 * z.F.size());
  for (double v : z.F.data()) x.push_back(s * v);
  for (double v : z.P.data()) x.push_back(v / s);
  return x;
}

std::shared_ptr<const KdTree> LocalDataSet::index(double modulus) const {
  if (kind_ != Kind::kCloud) throw std::logic_error("graph data sets have no point index");
  std::lock_guard lock(index_mutex_);
  if (index_ && index_modulus_ == modulus) return index_;
  const std::size_t k = 2 * static_cast<std::size_t>(n_ * n_);
  std::vector<double> coords;
  coords.reserve(points_.size() * k);
  for (const PhasePoint& z : points_) {
    const std::vector<double> x = embed(z, modulus);
    coords.insert(coords.end(), x.begin(), x.end());
  }
  index_ = std::make_shared<const KdTree>(std::move(coords), k);
  index_modulus_ = modulus;
  return index_;
}

// ---------------------------------------------------------------- sampling

LocalDataSet sample_graph(const EnergyModel& m, const SamplingBox& box, std::size_t count, double noise,
                          std::uint64_t seed, bool filter_det) {
  const int n = m.dim();
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (box.center.dim() != n || box.half_width.dim() != n) throw std::invalid_argument("sampling box dimension mismatch");
  for (int k = 0; k < box.half_width.size(); ++k) {
    if (!(box.half_width[k] >= 0.0) || !std::isfinite(box.center[k]) || !std::isfinite(box.half_width[k])) {
      throw std::invalid_argument("empty sampling box: half widths must be finite and >= 0");
    }
  }
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");

  Rng rng(seed);
  std::vector<PhasePoint> pts;
  pts.reserve(count);
  const std::size_t max_rejects = 1000 * count + 1000;
  std::size_t rejects = 0;
  while (pts.size() < count) {
    Mat f = box.center;
    for (int k = 0; k < f.size(); ++k) f[k] += box.half_width[k] * rng.uniform(-1.0, 1.0);
    // Noise draws happen before rejection so every F consumes the same stream length.
    Mat eps = rng.normal_mat(n);
    if (filter_det && !(det(f) > 0.0)) {
      if (++rejects > max_rejects) throw std::invalid_argument("empty sampling box: no F with det F > 0 found");
      continue;
    }
    Mat p = stress(m, f);
    p += eps * (noise * norm(p) / n);
    pts.push_back({f, p});
  }
  DataSetMetadata meta;
  meta.source = "sampled-graph";
  meta.model = m;
  meta.box = box;
  meta.noise = noise;
  meta.seed = seed;
  meta.filter_det = filter_det;
  meta.base_count = count;
  return LocalDataSet::cloud(n, std::move(pts), std::move(meta));
}

// ---------------------------------------------------------------- psi / nearest

namespace {

PsiResult scan_cloud(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z) {
  PsiResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = dev.deviation(z, d.point(i));
    if (v < best.value) {
      best.value = v;
      best.index = i;
    }
  }
  best.argmin = d.point(best.index);
  return best;
}

PsiResult search_cloud(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z) {
  if (d.empty()) throw std::invalid_argument("nearest-point query on an empty data set");
  if (z.dim() != d.dim()) throw std::invalid_argument("query dimension does not match the data set");
  if (!dev.is_quadratic()) return scan_cloud(d, dev, z);
  const auto tree = d.index(dev.modulus());
  const KdTree::Hit hit = tree->nearest(embed(z, dev.modulus()));
  PsiResult r;
  r.index = hit.index;
  r.argmin = d.point(hit.index);
  r.value = dev.deviation(z, r.argmin);
  return r;
}

std::vector<Mat> start_directions(int n) {
  const double s2 = 1.0 / std::sqrt(2.0);
  Mat sym_off = (Mat::unit(n, 0, 1) + Mat::unit(n, 1, 0)) * s2;
  Mat skew = (Mat::unit(n, 0, 1) - Mat::unit(n, 1, 0)) * s2;
  Mat dev = (Mat::unit(n, 0, 0) - Mat::unit(n, 1, 1)) * s2;
  return {Mat::identity(n) / std::sqrt(static_cast<double>(n)), skew, dev, sym_off};
}

PsiResult search_graph(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z) {
  const int n = d.dim();
  if (z.dim() != n) throw std::invalid_argument("query dimension does not match the data set");
  const int k = n * n;
  const StressFunction& t = d.stress();
  auto to_mat = [n](const opt::Vec& x) { return Mat(n, std::span<const double>(x.data(), x.size())); };

  auto f = [&](const opt::Vec& x) {
    const Mat fp = to_mat(x);
    return dev.V(z.F - fp) + dev.V_star(z.P - t(fp));
  };
  auto grad = [&](const opt::Vec& x) {
    const Mat fp = to_mat(x);
    const Mat gv = dev.grad_V(z.F - fp);
    const Mat gs = dev.grad_V_star(z.P - t(fp));
    opt::Vec g(k);
    for (int j = 0; j < k; ++j) {
      Mat e(n);
      e[j] = 1.0;
      g[j] = -gv[j] - dot(d.stress_tangent(fp, e), gs);
    }
    return g;
  };

  std::vector<Mat> starts{z.F};
  const double s = d.perturbation_scale();
  for (const Mat& dir : start_directions(n)) {
    starts.push_back(z.F + s * dir);
    starts.push_back(z.F - s * dir);
  }

  PsiResult best;
  best.value = std::numeric_limits<double>::infinity();
  best.certified = false;
  for (const Mat& s0 : starts) {
    opt::Vec x0(k);
    for (int j = 0; j < k; ++j) x0[j] = s0[j];
    const opt::Result r = opt::bfgs(f, grad, x0, 1e-12 * (1.0 + norm(z.F) + norm(z.P)), 400);
    if (r.value < best.value) {
      best.value = r.value;
      const Mat fp = to_mat(r.x);
      best.argmin = {fp, t(fp)};
    }
  }
  return best;
}

}  // namespace

PsiResult psi(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z) {
  if (d.is_graph()) return search_graph(d, dev, z);
  return search_cloud(d, dev, z);
}

PsiResult nearest(const LocalDataSet& d, const DeviationPair& dev, const PhasePoint& z) { return psi(d, dev, z); }

// ---------------------------------------------------------------- set transforms

double moment_residual(const PhasePoint& z) { return skew_norm(z.P * transpose(z.F)); }

LocalDataSet filter_moment_equilibrium(const LocalDataSet& d, double tol) {
  if (d.is_graph()) throw std::invalid_argument("moment-equilibrium filtering needs a cloud data set");
  std::vector<PhasePoint> kept;
  kept.reserve(d.size());
  for (const PhasePoint& z : d.points()) {
    if (moment_residual(z) <= tol * (1.0 + norm(z.F) * norm(z.P))) kept.push_back(z);
  }
  DataSetMetadata meta = d.metadata();
  meta.moment_filter_tol = tol;
  meta.moment_filter_removed += d.size() - kept.size();
  meta.base_count = kept.size() / static_cast<std::size_t>(meta.m_rot);
  return LocalDataSet::cloud(d.dim(), std::move(kept), std::move(meta));
}

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

double rotation_angle(const Mat& r) { return std::acos(std::clamp((trace(r) - 1.0) / 2.0, -1.0, 1.0)); }

}  // namespace

std::vector<Mat> orbit_rotations(int n, int m_rot) {
  if (m_rot < 1) throw std::invalid_argument("orbit augmentation factor must be >= 1");
  std::vector<Mat> rots;
  rots.reserve(static_cast<std::size_t>(m_rot));
  rots.push_back(Mat::identity(n));
  for (int j = 1; j < m_rot; ++j) {
    if (n == 2) {
      rots.push_back(rotation2d(2.0 * std::numbers::pi * j / m_rot));
      continue;
    }
    // Shoemake's map of the unit cube onto unit quaternions, fed with Halton points.
    const double u1 = radical_inverse(static_cast<std::uint64_t>(j), 2);
    const double u2 = radical_inverse(static_cast<std::uint64_t>(j), 3);
    const double u3 = radical_inverse(static_cast<std::uint64_t>(j), 5);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double x = a * std::sin(2 * std::numbers::pi * u2), y = a * std::cos(2 * std::numbers::pi * u2);
    const double z = b * std::sin(2 * std::numbers::pi * u3), w = b * std::cos(2 * std::numbers::pi * u3);
    rots.push_back(Mat{1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                       2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                       2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)});
  }
  return rots;
}

LocalDataSet augment_orbit(const LocalDataSet& d, int m_rot) {
  if (d.is_graph()) throw std::invalid_argument("orbit augmentation needs a cloud data set");
  const std::vector<Mat> rots = orbit_rotations(d.dim(), m_rot);
  std::vector<PhasePoint> out;
  out.reserve(d.size() * rots.size());
  for (const PhasePoint& z : d.points())
    for (const Mat& q : rots) out.push_back({q * z.F, q * z.P});

  DataSetMetadata meta = d.metadata();
  meta.base_count = d.size();
  meta.m_rot = m_rot;
  if (m_rot == 1) {
    meta.orbit_gap_angle = 0.0;
  } else if (d.dim() == 2) {
    meta.orbit_gap_angle = std::numbers::pi / m_rot;
    meta.orbit_gap_empirical = false;
  } else {
    // Covering angle of the rotation set, estimated from Haar samples.
    Rng rng(0x0b17a9u);
    double worst = 0.0;
    for (int s = 0; s < 4096; ++s) {
      const Mat q = rng.rotation(3);
      double best = std::numbers::pi;
      for (const Mat& r : rots) best = std::min(best, rotation_angle(transpose(r) * q));
      worst = std::max(worst, best);
    }
    meta.orbit_gap_angle = worst;
    meta.orbit_gap_empirical = true;
  }
  return LocalDataSet::cloud(d.dim(), std::move(out), std::move(meta));
}

}  // namespace ddfe
