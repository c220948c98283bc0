#include "ddfe/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ddfe/optimize.hpp"
#include "ddfe/parallel.hpp"

namespace ddfe {

// ---------------------------------------------------------------- vocabulary

std::string to_string(Property p) {
  switch (p) {
    case Property::kCoercivity: return "coercivity";
    case Property::kPolymonotone2d: return "polymonotonicity_2d";
    case Property::kPolymonotone3d: return "polymonotonicity_3d";
    case Property::kQuasimonotone: return "quasimonotonicity";
    case Property::kGrowth: return "growth";
    case Property::kFrameIndifference: return "frame_indifference";
    case Property::kMomentEquilibrium: return "moment_equilibrium";
  }
  return "?";
}

std::string to_string(Verdict v) { return v == Verdict::kViolated ? "violated" : "no-violation-found"; }

Property property_from_string(const std::string& s) {
  for (Property p : {Property::kCoercivity, Property::kPolymonotone2d, Property::kPolymonotone3d,
                     Property::kQuasimonotone, Property::kGrowth, Property::kFrameIndifference,
                     Property::kMomentEquilibrium}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown certificate property '" + s + "'");
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "violated") return Verdict::kViolated;
  if (s == "no-violation-found") return Verdict::kNoViolationFound;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

const Mat& Witness::matrix(const std::string& name) const {
  for (const auto& [k, v] : matrices)
    if (k == name) return v;
  throw std::out_of_range("witness has no matrix '" + name + "'");
}

const std::vector<double>& Witness::param(const std::string& name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  throw std::out_of_range("witness has no parameter '" + name + "'");
}

bool is_violation(double margin, double lhs, double rhs) {
  if (!std::isfinite(margin)) return true;
  return margin < -kViolationTolerance * (1.0 + std::abs(lhs) + std::abs(rhs));
}

namespace {

constexpr std::uint64_t kBatchSize = 4096;

double relative_margin(const Witness& w) {
  if (!std::isfinite(w.margin)) return -std::numeric_limits<double>::infinity();
  return w.margin / (1.0 + std::abs(w.lhs) + std::abs(w.rhs));
}

struct SearchOutcome {
  std::uint64_t samples = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::optional<Witness> worst;  // smallest relative margin
  bool violated = false;
};

// Evaluates `sample(rng, i)` for i in [0, budget), one independent stream per
// batch, and reduces in batch order.
template <class SampleFn>
SearchOutcome search(std::uint64_t budget, std::uint64_t seed, SampleFn&& sample) {
  const std::uint64_t batches = (budget + kBatchSize - 1) / kBatchSize;
  auto results = parallel_batches<SearchOutcome>(batches, [&](std::size_t b) {
    SearchOutcome out;
    Rng rng(seed, b + 1);
    const std::uint64_t begin = b * kBatchSize;
    const std::uint64_t end = std::min(budget, begin + kBatchSize);
    for (std::uint64_t i = begin; i < end; ++i) {
      Witness w = sample(rng, i);
      ++out.samples;
      const double rel = relative_margin(w);
      out.violated = out.violated || is_violation(w.margin, w.lhs, w.rhs);
      if (!out.worst || rel < out.min_margin) {
        out.min_margin = rel;
        out.worst = std::move(w);
      }
    }
    return out;
  });
  SearchOutcome total;
  for (SearchOutcome& r : results) {
    total.samples += r.samples;
    total.violated = total.violated || r.violated;
    if (r.worst && (!total.worst || r.min_margin < total.min_margin)) {
      total.min_margin = r.min_margin;
      total.worst = std::move(r.worst);
    }
  }
  if (!total.worst) total.min_margin = 0.0;
  return total;
}

Certificate make_certificate(Property p, std::uint64_t seed, SearchOutcome&& s) {
  Certificate c;
  c.property = p;
  c.seed = seed;
  c.samples_tested = s.samples;
  c.min_margin = s.min_margin;
  c.labels["margin"] = "relative: margin / (1 + |lhs| + |rhs|)";
  if (s.violated) {
    c.verdict = Verdict::kViolated;
    c.witness = std::move(s.worst);
  }
  return c;
}

const char* yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

// ---------------------------------------------------------------- coercivity

Witness coercivity_margin(const StressFunction& t, double p, const CoercivityConstants& k, const Mat& xi) {
  const double q = p / (p - 1.0);
  const Mat tx = t(xi);
  Witness w;
  w.matrices = {{"xi", xi}, {"T", tx}};
  w.lhs = dot(xi, tx);
  w.rhs = k.inv_c_F * std::pow(norm(xi), p) + k.inv_c_P * std::pow(norm(tx), q) - k.c;
  w.margin = w.lhs - w.rhs;
  return w;
}

namespace {

std::vector<Mat> probe_directions(int n, Rng& rng, int random_count) {
  const double s2 = 1.0 / std::sqrt(2.0);
  std::vector<Mat> dirs{Mat::identity(n) / std::sqrt(static_cast<double>(n)), Mat::unit(n, 0, 0),
                        (Mat::unit(n, 0, 1) - Mat::unit(n, 1, 0)) * s2,
                        (Mat::unit(n, 0, 0) - Mat::unit(n, 1, 1)) * s2, -Mat::identity(n) / std::sqrt(double(n))};
  for (int i = 0; i < random_count; ++i) dirs.push_back(rng.direction(n));
  return dirs;
}

void check_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("coercivity exponent p must be > 1");
}

}  // namespace

CoercivityConstants fit_coercivity_constants(const StressFunction& t, double p, std::uint64_t seed) {
  check_exponent(p);
  const double q = p / (p - 1.0);
  Rng rng(seed, 0);
  const std::vector<Mat> dirs = probe_directions(t.dim, rng, 123);
  constexpr int kRadii = 41;
  struct Probe {
    double r, work, a, b;
  };
  std::vector<Probe> probes;
  for (int i = 0; i < kRadii; ++i) {
    const double r = std::pow(10.0, -2.0 + 4.0 * i / (kRadii - 1));
    for (const Mat& d : dirs) {
      const Mat xi = r * d;
      const Mat tx = t(xi);
      probes.push_back({r, dot(xi, tx), std::pow(r, p), std::pow(norm(tx), q)});
    }
  }
  // Stage 1: the asymptotic work ratio sets the slopes, the grid deficit sets c.
  double ratio = std::numeric_limits<double>::infinity();
  for (const Probe& pr : probes)
    if (pr.r >= 10.0) ratio = std::min(ratio, pr.work / (pr.a + pr.b));
  const double kappa = (std::isfinite(ratio) && ratio > 0.0) ? 0.25 * ratio : 1e-6;
  double deficit = 0.0;
  for (const Probe& pr : probes) deficit = std::max(deficit, kappa * (pr.a + pr.b) - pr.work);
  return {kappa, kappa, 2.0 * deficit + 1e-6};
}

Certificate check_coercivity(const StressFunction& t, double p, std::uint64_t budget, std::uint64_t seed) {
  check_exponent(p);
  const CoercivityConstants k = fit_coercivity_constants(t, p, seed);
  const int n = t.dim;
  SearchOutcome s = search(budget, seed, [&](Rng& rng, std::uint64_t i) {
    const Mat xi = i == 0 ? Mat(n) : rng.log_uniform_mat(n, 1e-2, 1e3);
    return coercivity_margin(t, p, k, xi);
  });
  Certificate c = make_certificate(Property::kCoercivity, seed, std::move(s));
  c.constants_used = {{"p", p},           {"q", p / (p - 1.0)}, {"c_F", 1.0 / k.inv_c_F},
                      {"c_P", 1.0 / k.inv_c_P}, {"c", k.c}};
  c.labels["constants"] = "fitted on radial grid |xi| in [1e-2,1e2], then fixed";
  c.labels["sampling"] = "|xi| log-uniform in [1e-2,1e3] plus xi=0";
  return c;
}

// ---------------------------------------------------------------- polymonotonicity

Witness polymonotone_2d_margin(const EnergyModel& m, const Mat& f, const Mat& g) {
  const double a = m.a();
  const double b = m.g().growth_b();
  const double g2 = norm_sq(g);
  const double fg = dot(f, g);
  Witness w;
  w.matrices = {{"F", f}, {"G", g}};
  w.lhs = dot(stress(m, f + g) - stress(m, f), g);
  w.rhs = 0.25 * a * (g2 + 3.0 * fg) * (g2 + 3.0 * fg) + m.g().derivative(det(f)) * det(g) + (1.0 - 0.5 * b) * g2;
  w.margin = w.lhs - w.rhs;
  return w;
}

Witness polymonotone_3d_margin(const EnergyModel& m, const Mat& f, const Mat& g, double c_prime) {
  const double g2 = norm_sq(g);
  const double f_cof_g = dot(f, cof(g));
  const double dg = det(g);
  Witness w;
  w.matrices = {{"F", f}, {"G", g}};
  w.lhs = dot(stress(m, f + g) - stress(m, f), g);
  w.rhs = c_prime * m.e() * g2 * g2 * g2 + m.g().derivative(det(f)) * (f_cof_g + dg) +
          m.g().derivative(0.0) * (f_cof_g + 2.0 * dg);
  w.margin = w.lhs - w.rhs;
  return w;
}

Certificate check_polymonotone_2d(const EnergyModel& m, std::uint64_t budget, std::uint64_t seed) {
  if (m.flavor() != Flavor::kW2 && m.flavor() != Flavor::kHatW2) {
    throw std::invalid_argument("2D polymonotonicity check needs a W2 or hatW2 model");
  }
  SearchOutcome s = search(budget, seed, [&](Rng& rng, std::uint64_t) {
    const Mat f = rng.log_uniform_mat(2, 1e-2, 10.0);
    const Mat g = rng.log_uniform_mat(2, 1e-2, 10.0);
    return polymonotone_2d_margin(m, f, g);
  });
  Certificate c = make_certificate(Property::kPolymonotone2d, seed, std::move(s));
  c.constants_used = {{"a", m.a()}, {"b", m.g().growth_b()}, {"d", m.g().growth_d()}, {"beta", m.beta()}};
  c.labels["hypotheses_b_le_2_d_le_3a"] = yes_no(m.flags().polymonotone_2d);
  c.labels["boundary_case_b_eq_2"] = yes_no(m.flags().polymonotone_boundary_case);
  c.labels["closedness_window_2d"] = yes_no(m.flags().closedness_window_2d);
  c.labels["sampling"] = "|F|,|G| log-uniform in [1e-2,10]";
  return c;
}

Certificate check_polymonotone_3d(const EnergyModel& m, std::uint64_t budget, std::uint64_t seed,
                                  std::optional<double> c_prime) {
  if (m.flavor() != Flavor::kW3 && m.flavor() != Flavor::kHatW3) {
    throw std::invalid_argument("3D polymonotonicity check needs a W3 or hatW3 model");
  }
  Certificate c;
  std::map<std::string, double> constants{{"a", m.a()}, {"e", m.e()}, {"d", m.g().growth_d()}, {"beta", m.beta()}};
  double cp = 0.0;
  if (c_prime) {
    cp = *c_prime;
    constants["c_prime"] = cp;
  } else {
    const CstarConstants k = estimate_cstar_constants(seed, 20000);
    cp = k.c_prime;
    constants["c_prime"] = k.c_prime;
    constants["c_starstar"] = k.c_starstar;
    constants["C_star"] = k.C_star;
    constants["c_star"] = k.c_star;
  }
  SearchOutcome s = search(budget, seed, [&](Rng& rng, std::uint64_t) {
    const Mat f = rng.log_uniform_mat(3, 1e-2, 10.0);
    const Mat g = rng.log_uniform_mat(3, 1e-2, 10.0);
    return polymonotone_3d_margin(m, f, g, cp);
  });
  c = make_certificate(Property::kPolymonotone3d, seed, std::move(s));
  c.constants_used = std::move(constants);
  if (c.constants_used.count("c_star")) {
    const double window = std::min(3.0, c.constants_used["c_star"]) * m.e();
    c.labels["closedness_window_3d"] = yes_no(m.g().growth_d() < window);
  }
  c.labels["window"] = "empirical";
  c.labels["sampling"] = "|F|,|G| log-uniform in [1e-2,10]";
  return c;
}

// ---------------------------------------------------------------- quasimonotonicity

namespace {

// Smooth bump exp(1 - 1/(1-u^2)), u = (2s-1)/w, and its derivative in s.
std::pair<double, double> bump(double s, double w) {
  const double u = (2.0 * s - 1.0) / w;
  if (std::abs(u) >= 1.0) return {0.0, 0.0};
  const double one_m = 1.0 - u * u;
  const double v = std::exp(1.0 - 1.0 / one_m);
  const double dv = v * (-2.0 * u * (2.0 / w)) / (one_m * one_m);
  return {v, dv};
}

}  // namespace

Mat TestField::gradient(std::span<const double> x) const {
  Mat d(n);
  std::array<double, 3> eta{}, deta{};
  double prod = 1.0;
  for (int l = 0; l < n; ++l) {
    std::tie(eta[l], deta[l]) = bump(x[l], support);
    prod *= eta[l];
  }
  if (prod == 0.0) {
    // Derivatives of the bump vanish wherever one factor does.
    return d;
  }
  std::array<double, 3> s{};
  for (const Mode& md : modes) {
    double arg = md.phase;
    for (int l = 0; l < n; ++l) arg += 2.0 * std::numbers::pi * md.k[l] * x[l];
    const double sn = std::sin(arg), cs = std::cos(arg);
    for (int i = 0; i < n; ++i) {
      s[i] += md.amplitude[i] * sn;
      for (int j = 0; j < n; ++j) d(i, j) += prod * md.amplitude[i] * cs * 2.0 * std::numbers::pi * md.k[j];
    }
  }
  for (int j = 0; j < n; ++j) {
    const double dj = prod / eta[j] * deta[j];
    for (int i = 0; i < n; ++i) d(i, j) += dj * s[i];
  }
  return d;
}

std::vector<double> TestField::encode() const {
  std::vector<double> v{support};
  for (const Mode& md : modes) {
    for (int l = 0; l < 3; ++l) v.push_back(md.k[l]);
    v.push_back(md.phase);
    for (int l = 0; l < 3; ++l) v.push_back(md.amplitude[l]);
  }
  return v;
}

TestField TestField::decode(int n, std::span<const double> values) {
  if (values.empty() || (values.size() - 1) % 7 != 0) throw std::invalid_argument("malformed test-field encoding");
  TestField t;
  t.n = n;
  t.support = values[0];
  for (std::size_t o = 1; o < values.size(); o += 7) {
    Mode md;
    for (int l = 0; l < 3; ++l) md.k[l] = static_cast<int>(values[o + l]);
    md.phase = values[o + 3];
    for (int l = 0; l < 3; ++l) md.amplitude[l] = values[o + 4 + l];
    t.modes.push_back(md);
  }
  return t;
}

TestField TestField::random(int n, Rng& rng) {
  TestField t;
  t.n = n;
  const int count = 1 + static_cast<int>(rng.index(5));
  const double scale = rng.log_uniform(1e-3, 1.0);
  for (int m = 0; m < count; ++m) {
    Mode md;
    for (int l = 0; l < n; ++l) md.k[l] = static_cast<int>(rng.index(7)) - 3;
    md.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int l = 0; l < n; ++l) md.amplitude[l] = scale * rng.normal();
    t.modes.push_back(md);
  }
  return t;
}

GapFunction polymonotone_gap(const EnergyModel& m, double c_prime) {
  if (m.dim() == 2) {
    const double k = 1.0 - 0.5 * m.g().growth_b();
    return [k](const Mat&, const Mat& g) { return k * norm_sq(g); };
  }
  const double k = c_prime * m.e();
  return [k](const Mat&, const Mat& g) {
    const double g2 = norm_sq(g);
    return k * g2 * g2 * g2;
  };
}

Witness quasimonotone_margin(const StressFunction& t, const GapFunction& b, const Mat& f, const TestField& phi,
                             int grid) {
  if (grid < 8) throw std::invalid_argument("quasimonotonicity grid must be >= 8");
  const int n = t.dim;
  const Mat tf = t(f);
  const double h = 1.0 / grid;
  const double weight = std::pow(h, n);
  double lhs = 0.0, rhs = 0.0;
  std::array<double, 3> x{};
  const int total = n == 2 ? grid * grid : grid * grid * grid;
  for (int c = 0; c < total; ++c) {
    int r = c;
    for (int l = 0; l < n; ++l) {
      x[l] = (r % grid + 0.5) * h;
      r /= grid;
    }
    const Mat g = phi.gradient(std::span<const double>(x.data(), n));
    if (max_abs(g) == 0.0) continue;
    lhs += weight * dot(t(f + g) - tf, g);
    rhs += weight * b(f, g);
  }
  Witness w;
  w.matrices = {{"F", f}};
  w.params = {{"phi", phi.encode()}, {"grid", {static_cast<double>(grid)}}};
  w.lhs = lhs;
  w.rhs = rhs;
  w.margin = lhs - rhs;
  return w;
}

Certificate check_quasimonotone(const StressFunction& t, int n, const GapFunction& b, int grid,
                                std::uint64_t budget, std::uint64_t seed) {
  if (n != 2 && n != 3) throw std::invalid_argument("quasimonotonicity check needs n = 2 or 3");
  if (t.dim != n) throw std::invalid_argument("stress function dimension does not match n");
  if (grid < 8) throw std::invalid_argument("quasimonotonicity grid must be >= 8");
  SearchOutcome s = search(budget, seed, [&](Rng& rng, std::uint64_t) {
    const Mat f = rng.log_uniform_mat(n, 1e-2, 10.0);
    return quasimonotone_margin(t, b, f, TestField::random(n, rng), grid);
  });
  Certificate c = make_certificate(Property::kQuasimonotone, seed, std::move(s));
  c.constants_used = {{"grid", static_cast<double>(grid)}, {"n", static_cast<double>(n)}};
  c.labels["test_fields"] = "bump times <= 5 Fourier modes, support [0.1,0.9]^n, midpoint rule";
  return c;
}

// ---------------------------------------------------------------- growth

double growth_ratio(const StressFunction& t, double p, const Mat& f, const Mat& g) {
  const double gn = norm(g);
  if (gn == 0.0) return 0.0;
  const double den = (std::pow(norm(f), p - 2.0) + std::pow(gn, p - 2.0) + 1.0) * gn;
  return norm(t(f + g) - t(f)) / den;
}

Witness growth_margin(const StressFunction& t, double p, double c, const Mat& f, const Mat& g) {
  const double gn = norm(g);
  Witness w;
  w.matrices = {{"F", f}, {"G", g}};
  w.lhs = c * (std::pow(norm(f), p - 2.0) + std::pow(gn, p - 2.0) + 1.0) * gn;
  w.rhs = norm(t(f + g) - t(f));
  w.margin = w.lhs - w.rhs;
  return w;
}

Certificate check_growth(const StressFunction& t, double p, std::uint64_t budget, std::uint64_t seed) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw std::invalid_argument("growth exponent p must be >= 2");
  const int n = t.dim;
  constexpr int kRungs = 11;  // |F| = 10^{-2 + k/2}
  const std::uint64_t per_rung = std::max<std::uint64_t>(1, budget / kRungs);

  struct Sample {
    Mat f, g;
    double ratio;
  };
  struct Rung {
    double radius = 0.0;
    double max_finite = 0.0;
    bool non_finite = false;
    std::vector<Sample> top;  // max finite sample and first non-finite sample
  };
  auto rungs = parallel_batches<Rung>(kRungs, [&](std::size_t k) {
    Rung r;
    r.radius = std::pow(10.0, -2.0 + 0.5 * static_cast<double>(k));
    Rng rng(seed, k + 1);
    std::optional<Sample> best, bad;
    for (std::uint64_t i = 0; i < per_rung; ++i) {
      const Mat f = r.radius * rng.direction(n);
      const Mat g = rng.log_uniform_mat(n, 1e-3, 10.0) * std::max(1.0, r.radius);
      const double ratio = growth_ratio(t, p, f, g);
      if (!std::isfinite(ratio)) {
        r.non_finite = true;
        if (!bad) bad = Sample{f, g, ratio};
        continue;
      }
      if (!best || ratio > best->ratio) best = Sample{f, g, ratio};
    }
    if (best) {
      r.max_finite = best->ratio;
      r.top.push_back(*best);
    }
    if (bad) r.top.push_back(*bad);
    return r;
  });

  double stable = 0.0, overall = 0.0;
  for (const Rung& r : rungs) {
    if (r.radius <= 1.0) stable = std::max(stable, r.max_finite);
    overall = std::max(overall, r.max_finite);
  }
  const double threshold = 10.0 * stable;

  Certificate c;
  c.property = Property::kGrowth;
  c.seed = seed;
  c.samples_tested = per_rung * kRungs;
  c.constants_used = {{"p", p}, {"c", overall}, {"c_unit_scale", stable}, {"divergence_threshold", threshold}};
  for (const Rung& r : rungs) {
    c.constants_used["c_rung_" + std::to_string(static_cast<int>(std::lround(std::log10(r.radius) * 2)))] =
        r.max_finite;
  }
  c.labels["ladder"] = "|F| = 10^{-2 + k/2}, k = 0..10; |G| log-uniform in [1e-3,10] max(1,|F|)";
  // Witness: the most violating finite sample, else the first non-finite one.
  std::optional<Sample> witness;
  for (const Rung& r : rungs)
    for (const Sample& s : r.top)
      if (std::isfinite(s.ratio) && s.ratio > threshold && (!witness || s.ratio > witness->ratio)) witness = s;
  if (!witness)
    for (const Rung& r : rungs)
      for (const Sample& s : r.top)
        if (!witness && !std::isfinite(s.ratio)) witness = s;
  c.min_margin = stable > 0.0 ? (threshold - overall) / threshold : 0.0;
  if (witness) {
    c.verdict = Verdict::kViolated;
    c.witness = growth_margin(t, p, threshold, witness->f, witness->g);
  }
  return c;
}

// ---------------------------------------------------------------- data-set checks

Witness frame_gap_margin(const LocalDataSet& d, const PhasePoint& z, const Mat& q) {
  const PhasePoint rz{q * z.F, q * z.P};
  Witness w;
  w.matrices = {{"F", z.F}, {"P", z.P}, {"Q", q}};
  if (d.is_graph()) {
    w.rhs = norm(d.stress()(rz.F) - rz.P);
    w.lhs = 1e-10 * (1.0 + norm(z.P));
  } else {
    const PsiResult hit = nearest(d, DeviationPair::quadratic(1.0), rz);
    w.rhs = std::sqrt(2.0 * hit.value);
    const double zn = std::sqrt(norm_sq(z.F) + norm_sq(z.P));
    w.lhs = 2.0 * std::sin(0.5 * d.metadata().orbit_gap_angle) * zn + 1e-12 * (1.0 + zn);
  }
  w.margin = w.lhs - w.rhs;
  return w;
}

Certificate check_frame_indifference(const LocalDataSet& d, std::uint64_t budget, std::uint64_t seed) {
  if (d.empty()) throw std::invalid_argument("frame-indifference check on an empty data set");
  const int n = d.dim();
  SearchOutcome s = search(budget, seed, [&](Rng& rng, std::uint64_t) {
    PhasePoint z;
    if (d.is_graph()) {
      z.F = rng.log_uniform_mat(n, 1e-2, 1e2);
      z.P = d.stress()(z.F);
    } else {
      z = d.point(rng.index(d.size()));
    }
    return frame_gap_margin(d, z, rng.rotation(n));
  });
  Certificate c = make_certificate(Property::kFrameIndifference, seed, std::move(s));
  c.constants_used = {{"orbit_gap_angle", d.metadata().orbit_gap_angle},
                      {"m_rot", static_cast<double>(d.metadata().m_rot)}};
  c.labels["resolution"] = d.is_graph() ? "exact membership, 1e-10 (1+|P|)"
                                        : "2 sin(gap/2) |z| in the (F,P) Frobenius norm";
  if (d.metadata().orbit_gap_empirical) c.labels["orbit_gap"] = "empirical";
  return c;
}

Witness moment_margin(const PhasePoint& z) {
  Witness w;
  w.matrices = {{"F", z.F}, {"P", z.P}};
  w.rhs = moment_residual(z);
  w.lhs = 1e-10 * (1.0 + norm(z.F) * norm(z.P));
  w.margin = w.lhs - w.rhs;
  return w;
}

Certificate check_moment_equilibrium(const LocalDataSet& d, std::uint64_t budget, std::uint64_t seed) {
  if (d.empty()) throw std::invalid_argument("moment-equilibrium check on an empty data set");
  const int n = d.dim();
  const bool exhaustive = !d.is_graph() && budget >= d.size();
  const std::uint64_t count = exhaustive ? d.size() : budget;
  SearchOutcome s = search(count, seed, [&](Rng& rng, std::uint64_t i) {
    if (d.is_graph()) {
      const Mat f = rng.log_uniform_mat(n, 1e-2, 1e2);
      return moment_margin({f, d.stress()(f)});
    }
    return moment_margin(d.point(exhaustive ? i : rng.index(d.size())));
  });
  Certificate c = make_certificate(Property::kMomentEquilibrium, seed, std::move(s));
  c.constants_used = {{"tolerance", 1e-10}};
  c.labels["coverage"] = exhaustive ? "every stored point" : "random members";
  return c;
}

// ---------------------------------------------------------------- 3D constants

double w_six_monotonicity_gap(const Mat& f, const Mat& g) {
  auto dw = [](const Mat& x) {
    const double r2 = norm_sq(x);
    return x * (r2 * r2);
  };
  return dot(dw(f + g) - dw(f), g);
}

double cstarstar_ratio(const Mat& f, const Mat& g) {
  const double g2 = norm_sq(g);
  const double f4 = norm_sq(f) * norm_sq(f);
  return w_six_monotonicity_gap(f, g) / ((f4 + g2 * g2) * g2);
}

double Cstar_ratio(const Mat& f, const Mat& g) {
  const double fn = norm(f), gn = norm(g);
  const double num = std::abs(det(f + g)) * (fn / std::sqrt(3.0) + 2.0 * gn / std::pow(3.0, 1.5));
  return num / (fn * fn * fn * fn + gn * gn * gn * gn);
}

namespace {

// Minimizes ratio(F, G) over R^18 \ {G = 0}; the ratios are 0-homogeneous, so
// each candidate is normalized to |F|^2 + |G|^2 = 1.
double minimize_ratio(const std::function<double(const Mat&, const Mat&)>& ratio, std::uint64_t seed,
                      std::uint64_t budget, std::uint64_t stream) {
  auto split = [](const opt::Vec& x) {
    const double r = x.norm();
    Mat f(3), g(3);
    for (int i = 0; i < 9; ++i) {
      f[i] = x[i] / r;
      g[i] = x[9 + i] / r;
    }
    return std::pair{f, g};
  };
  auto obj = [&](const opt::Vec& x) {
    const auto [f, g] = split(x);
    if (norm_sq(g) < 1e-20) return std::numeric_limits<double>::infinity();
    return ratio(f, g);
  };

  // Rejection sampling: keep the best candidates as descent starts.
  Rng rng(seed, stream);
  constexpr std::size_t kStarts = 24;
  std::vector<std::pair<double, opt::Vec>> pool;
  for (std::uint64_t i = 0; i < budget; ++i) {
    opt::Vec x(18);
    const double mix = rng.uniform(0.0, 1.0);
    for (int k = 0; k < 9; ++k) x[k] = rng.normal();
    for (int k = 0; k < 9; ++k) x[9 + k] = rng.normal();
    // Bias half the candidates towards G parallel to F, where the extremes sit.
    if (mix < 0.5) {
      const double t = rng.uniform(-4.0, 4.0);
      for (int k = 0; k < 9; ++k) x[9 + k] = t * x[k] + 0.1 * x[9 + k];
    }
    const double v = obj(x);
    if (!std::isfinite(v)) continue;
    pool.emplace_back(v, std::move(x));
    if (pool.size() > 4 * kStarts) {
      std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      pool.resize(kStarts);
    }
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (pool.size() > kStarts) pool.resize(kStarts);

  double best = std::numeric_limits<double>::infinity();
  for (auto& [v, x] : pool) {
    best = std::min(best, v);
    auto grad = [&](const opt::Vec& y) { return opt::fd_gradient(obj, y, 1e-7); };
    const opt::Result r = opt::bfgs(obj, grad, x / x.norm(), 1e-9, 300);
    if (std::isfinite(r.value)) best = std::min(best, r.value);
  }
  return best;
}

}  // namespace

CstarConstants estimate_cstar_constants(std::uint64_t seed, std::uint64_t budget) {
  CstarConstants k;
  k.seed = seed;
  k.budget = budget;
  k.c_starstar = minimize_ratio(cstarstar_ratio, seed, budget, 0xC55);
  k.C_star = -minimize_ratio([](const Mat& f, const Mat& g) { return -Cstar_ratio(f, g); }, seed, budget, 0xC57);
  k.c_prime = 0.5 * k.c_starstar;
  k.c_star = 0.5 * k.c_starstar / k.C_star;
  return k;
}

}  // namespace ddfe
