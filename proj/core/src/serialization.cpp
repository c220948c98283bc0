#include "ddfe/serialization.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace ddfe::io {

ParseError::ParseError(const std::string& origin, std::size_t line, const std::string& what)
    : std::runtime_error(origin + ":" + std::to_string(line) + ": " + what), line_(line) {}

// ---------------------------------------------------------------- files

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write error on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

json parse_json(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i < upto; ++i)
      if (text[i] == '\n') ++line;
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ParseError(origin, line, msg);
  }
}

json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double to_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ParseError("expected a number, got " + j.dump());
}

namespace {

const json& at(const json& j, const char* key) {
  if (!j.is_object()) throw ParseError(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'");
  return *it;
}

double num_at(const json& j, const char* key) {
  try {
    return to_double(at(j, key));
  } catch (const ParseError& e) {
    throw ParseError(std::string("key '") + key + "': " + e.what());
  }
}

double num_or(const json& j, const char* key, double fallback) { return j.contains(key) ? num_at(j, key) : fallback; }

template <class T>
T get_at(const json& j, const char* key) {
  try {
    return at(j, key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("key '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get_at<T>(j, key) : fallback;
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> vec_from(const json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  std::vector<double> v;
  for (const json& x : j) v.push_back(to_double(x));
  return v;
}

json vec2_json(const Vec2& v) { return json::array({number(v[0]), number(v[1])}); }

Vec2 vec2_from(const json& j) {
  const std::vector<double> v = vec_from(j);
  if (v.size() != 2) throw ParseError("expected a 2-vector");
  return {v[0], v[1]};
}

}  // namespace

// ---------------------------------------------------------------- matrices and models

json to_json(const Mat& m) {
  json a = json::array();
  for (double x : m.data()) a.push_back(number(x));
  return a;
}

Mat mat_from_json(const json& j, int n) {
  const std::vector<double> v = vec_from(j);
  const int dim = v.size() == 4 ? 2 : v.size() == 9 ? 3 : 0;
  if (dim == 0 || (n != 0 && dim != n)) {
    throw ParseError("matrix needs " + (n ? std::to_string(n * n) : std::string("4 or 9")) + " entries, got " +
                     std::to_string(v.size()));
  }
  return Mat(dim, v);
}

json to_json(const ConvexScalarG& g) {
  if (g.form() == ConvexScalarG::Form::kQuadratic) return {{"form", "quadratic"}, {"beta", number(g.beta())}, {"t0", number(g.t0())}};
  return {{"form", "table"}, {"knots", vec_json(g.knots())}, {"slopes", vec_json(g.slopes())}, {"value0", number(g.value0())}};
}

ConvexScalarG g_from_json(const json& j) {
  const std::string form = get_or<std::string>(j, "form", "quadratic");
  if (form == "quadratic") return ConvexScalarG::quadratic(num_or(j, "beta", 0.0), num_or(j, "t0", 0.0));
  if (form == "table") return ConvexScalarG::table(vec_from(at(j, "knots")), vec_from(at(j, "slopes")), num_or(j, "value0", 0.0));
  throw ParseError("unknown g form '" + form + "'");
}

json to_json(const EnergyModel& m) {
  json j{{"flavor", to_string(m.flavor())}, {"n", m.dim()}, {"a", number(m.a())}};
  switch (m.flavor()) {
    case Flavor::kHatW2: j["beta"] = number(m.beta()); break;
    case Flavor::kHatW3:
      j["e"] = number(m.e());
      j["beta"] = number(m.beta());
      break;
    case Flavor::kW2: j["g"] = to_json(m.g()); break;
    case Flavor::kW3:
      j["e"] = number(m.e());
      j["g"] = to_json(m.g());
      break;
  }
  return j;
}

EnergyModel model_from_json(const json& j) {
  Flavor f;
  try {
    f = flavor_from_string(get_at<std::string>(j, "flavor"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  auto model = [&]() {
    switch (f) {
      case Flavor::kHatW2: return EnergyModel::hat_w2(num_at(j, "a"), num_at(j, "beta"));
      case Flavor::kHatW3: return EnergyModel::hat_w3(num_at(j, "a"), num_at(j, "e"), num_at(j, "beta"));
      case Flavor::kW2: return EnergyModel::w2(num_at(j, "a"), j.contains("g") ? g_from_json(j["g"]) : ConvexScalarG{});
      case Flavor::kW3:
        return EnergyModel::w3(num_at(j, "a"), num_at(j, "e"), j.contains("g") ? g_from_json(j["g"]) : ConvexScalarG{});
    }
    throw ParseError("unreachable flavor");
  }();
  if (j.contains("n") && get_at<int>(j, "n") != model.dim()) {
    throw ParseError("flavor " + to_string(f) + " is " + std::to_string(model.dim()) + "-dimensional but n = " +
                     std::to_string(get_at<int>(j, "n")));
  }
  return model;
}

json to_json(const DeviationPair& d) {
  if (d.is_quadratic()) return {{"form", "quadratic"}, {"modulus", number(d.modulus())}};
  return {{"form", "power"}, {"p", number(d.p())}};
}

DeviationPair deviation_from_json(const json& j) {
  const std::string form = get_or<std::string>(j, "form", "quadratic");
  if (form == "quadratic") return DeviationPair::quadratic(num_or(j, "modulus", 1.0));
  if (form == "power") return DeviationPair::power(num_at(j, "p"));
  throw ParseError("unknown deviation form '" + form + "'");
}

json to_json(const SamplingBox& b) { return {{"center", to_json(b.center)}, {"half_width", to_json(b.half_width)}}; }

SamplingBox box_from_json(const json& j) {
  SamplingBox b{mat_from_json(at(j, "center")), Mat()};
  b.half_width = mat_from_json(at(j, "half_width"), b.center.dim());
  return b;
}

json to_json(const DataSetMetadata& m) {
  return {{"source", m.source},
          {"model", m.model ? to_json(*m.model) : json()},
          {"box", m.box ? to_json(*m.box) : json()},
          {"noise", number(m.noise)},
          {"seed", m.seed},
          {"filter_det", m.filter_det},
          {"base_count", m.base_count},
          {"m_rot", m.m_rot},
          {"orbit_gap_angle", number(m.orbit_gap_angle)},
          {"orbit_gap_empirical", m.orbit_gap_empirical},
          {"moment_filter_tol", m.moment_filter_tol ? number(*m.moment_filter_tol) : json()},
          {"moment_filter_removed", m.moment_filter_removed}};
}

DataSetMetadata metadata_from_json(const json& j) {
  DataSetMetadata m;
  m.source = get_or<std::string>(j, "source", "file");
  if (j.contains("model") && !j["model"].is_null()) m.model = model_from_json(j["model"]);
  if (j.contains("box") && !j["box"].is_null()) m.box = box_from_json(j["box"]);
  m.noise = num_or(j, "noise", 0.0);
  m.seed = get_or<std::uint64_t>(j, "seed", 0);
  m.filter_det = get_or<bool>(j, "filter_det", false);
  m.base_count = get_or<std::size_t>(j, "base_count", 0);
  m.m_rot = get_or<int>(j, "m_rot", 1);
  m.orbit_gap_angle = num_or(j, "orbit_gap_angle", 0.0);
  m.orbit_gap_empirical = get_or<bool>(j, "orbit_gap_empirical", false);
  if (j.contains("moment_filter_tol") && !j["moment_filter_tol"].is_null()) m.moment_filter_tol = num_at(j, "moment_filter_tol");
  m.moment_filter_removed = get_or<std::size_t>(j, "moment_filter_removed", 0);
  return m;
}

// ---------------------------------------------------------------- certificates

json to_json(const Witness& w) {
  json mats = json::array(), params = json::array();
  for (const auto& [k, v] : w.matrices) mats.push_back({{"name", k}, {"value", to_json(v)}});
  for (const auto& [k, v] : w.params) params.push_back({{"name", k}, {"value", vec_json(v)}});
  return {{"matrices", mats}, {"params", params}, {"lhs", number(w.lhs)}, {"rhs", number(w.rhs)}, {"margin", number(w.margin)}};
}

Witness witness_from_json(const json& j) {
  Witness w;
  for (const json& m : get_or<json>(j, "matrices", json::array()))
    w.matrices.emplace_back(get_at<std::string>(m, "name"), mat_from_json(at(m, "value")));
  for (const json& p : get_or<json>(j, "params", json::array()))
    w.params.emplace_back(get_at<std::string>(p, "name"), vec_from(at(p, "value")));
  w.lhs = num_at(j, "lhs");
  w.rhs = num_at(j, "rhs");
  w.margin = num_at(j, "margin");
  return w;
}

json to_json(const Certificate& c) {
  json consts = json::object();
  for (const auto& [k, v] : c.constants_used) consts[k] = number(v);
  return {{"property", to_string(c.property)},
          {"verdict", to_string(c.verdict)},
          {"witness", c.witness ? to_json(*c.witness) : json()},
          {"samples_tested", c.samples_tested},
          {"constants_used", consts},
          {"labels", c.labels},
          {"seed", c.seed},
          {"min_margin", number(c.min_margin)}};
}

Certificate certificate_from_json(const json& j) {
  Certificate c;
  try {
    c.property = property_from_string(get_at<std::string>(j, "property"));
    c.verdict = verdict_from_string(get_at<std::string>(j, "verdict"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  if (j.contains("witness") && !j["witness"].is_null()) c.witness = witness_from_json(j["witness"]);
  c.samples_tested = get_at<std::uint64_t>(j, "samples_tested");
  const json consts = get_or<json>(j, "constants_used", json::object());
  for (const auto& [k, v] : consts.items()) c.constants_used[k] = to_double(v);
  c.labels = get_or<std::map<std::string, std::string>>(j, "labels", {});
  c.seed = get_at<std::uint64_t>(j, "seed");
  c.min_margin = num_or(j, "min_margin", 0.0);
  return c;
}

json to_json(const CstarConstants& k) {
  return {{"c_starstar", number(k.c_starstar)}, {"c_prime", number(k.c_prime)}, {"C_star", number(k.C_star)},
          {"c_star", number(k.c_star)}, {"seed", k.seed}, {"budget", k.budget}};
}

// ---------------------------------------------------------------- meshes

json to_json(const Mesh& m) {
  json nodes = json::array(), tris = json::array(), dir = json::array(), neu = json::array();
  for (const Vec2& x : m.nodes) nodes.push_back(vec2_json(x));
  for (const Triangle& t : m.triangles) tris.push_back(t);
  for (const Edge& e : m.dirichlet_edges) dir.push_back(e);
  for (const Edge& e : m.neumann_edges) neu.push_back(e);
  return {{"nodes", nodes}, {"triangles", tris}, {"dirichlet_edges", dir}, {"neumann_edges", neu}};
}

Mesh mesh_from_json(const json& j) {
  Mesh m;
  for (const json& x : at(j, "nodes")) m.nodes.push_back(vec2_from(x));
  m.triangles = get_at<std::vector<Triangle>>(j, "triangles");
  m.dirichlet_edges = get_at<std::vector<Edge>>(j, "dirichlet_edges");
  m.neumann_edges = get_or<std::vector<Edge>>(j, "neumann_edges", {});
  return m;
}

namespace {

json selector_json(const EdgeSelector& s) {
  switch (s.kind) {
    case EdgeSelector::Kind::kAll: return "all";
    case EdgeSelector::Kind::kList: return s.indices;
    case EdgeSelector::Kind::kX: return {{"x", number(s.value)}};
    case EdgeSelector::Kind::kY: return {{"y", number(s.value)}};
  }
  return "all";
}

EdgeSelector selector_from(const json& j) {
  EdgeSelector s;
  if (j.is_string()) {
    if (j.get<std::string>() != "all") throw ParseError("edge selector string must be \"all\"");
    return s;
  }
  if (j.is_array()) {
    s.kind = EdgeSelector::Kind::kList;
    s.indices = j.get<std::vector<int>>();
    return s;
  }
  if (j.is_object() && j.size() == 1 && (j.contains("x") || j.contains("y"))) {
    s.kind = j.contains("x") ? EdgeSelector::Kind::kX : EdgeSelector::Kind::kY;
    s.value = to_double(j.begin().value());
    return s;
  }
  throw ParseError("edge selector must be \"all\", an index list, {\"x\": v} or {\"y\": v}");
}

}  // namespace

json to_json(const BoundaryConditions& bc) {
  json dir = json::array(), neu = json::array();
  for (const DirichletSpec& s : bc.dirichlet)
    dir.push_back({{"edges", selector_json(s.edges)}, {"A", to_json(s.A)}, {"b", vec2_json(s.b)}});
  for (const NeumannSpec& s : bc.neumann) neu.push_back({{"edges", selector_json(s.edges)}, {"traction", vec2_json(s.traction)}});
  json j{{"dirichlet", dir}, {"neumann", neu}};
  if (bc.body_force.size() == 1) {
    j["body_force"] = vec2_json(bc.body_force[0]);
  } else {
    json f = json::array();
    for (const Vec2& v : bc.body_force) f.push_back(vec2_json(v));
    j["body_force"] = f;
  }
  return j;
}

BoundaryConditions bc_from_json(const json& j) {
  BoundaryConditions bc;
  for (const json& s : get_or<json>(j, "dirichlet", json::array())) {
    DirichletSpec d;
    d.edges = selector_from(s.contains("edges") ? s["edges"] : json("all"));
    if (s.contains("A")) d.A = mat_from_json(s["A"], 2);
    if (s.contains("b")) d.b = vec2_from(s["b"]);
    bc.dirichlet.push_back(d);
  }
  for (const json& s : get_or<json>(j, "neumann", json::array())) {
    NeumannSpec n;
    n.edges = selector_from(s.contains("edges") ? s["edges"] : json("all"));
    n.traction = vec2_from(at(s, "traction"));
    bc.neumann.push_back(n);
  }
  if (j.contains("body_force")) {
    const json& f = j["body_force"];
    if (!f.is_array()) throw ParseError("body_force must be [fx, fy] or a list of them");
    if (!f.empty() && !f[0].is_array()) {
      bc.body_force.push_back(vec2_from(f));
    } else {
      for (const json& v : f) bc.body_force.push_back(vec2_from(v));
    }
  }
  return bc;
}

// ---------------------------------------------------------------- solver

json to_json(const DDConfig& c) {
  return {{"deviation", to_json(c.dev)},
          {"max_outer", c.max_outer},
          {"stop_on_stagnation", c.stop_on_stagnation},
          {"tol_J", c.tol_J ? number(*c.tol_J) : json()},
          {"seed", c.seed},
          {"init", to_string(c.init)}};
}

DDConfig ddconfig_from_json(const json& j) {
  DDConfig c;
  if (!j.is_object() || !j.contains("seed")) throw ParseError("solver config needs an explicit \"seed\"");
  c.seed = get_at<std::uint64_t>(j, "seed");
  if (j.contains("deviation")) c.dev = deviation_from_json(j["deviation"]);
  c.max_outer = get_or<int>(j, "max_outer", c.max_outer);
  c.stop_on_stagnation = get_or<bool>(j, "stop_on_stagnation", true);
  if (j.contains("tol_J") && !j["tol_J"].is_null()) c.tol_J = num_at(j, "tol_J");
  try {
    c.init = init_from_string(get_or<std::string>(j, "init", "auto"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  return c;
}

json to_json(const Diagnostics& d) {
  return {{"delta_gap", number(d.delta_gap)},
          {"curl_residual", number(d.curl_residual)},
          {"div_residual", number(d.div_residual)},
          {"duality_gap", number(d.duality_gap)}};
}

Diagnostics diagnostics_from_json(const json& j) {
  return {num_at(j, "delta_gap"), num_at(j, "curl_residual"), num_at(j, "div_residual"), num_at(j, "duality_gap")};
}

json to_json(const SolveReport& r) {
  return {{"J_history", vec_json(r.J_history)},
          {"final_J", number(r.final_J())},
          {"classification", to_string(r.classification)},
          {"diagnostics", to_json(r.diagnostics)},
          {"iterations", r.iterations},
          {"stagnated", r.stagnated},
          {"tol_J", number(r.tol_J)},
          {"data_count", r.data_count},
          {"init", to_string(r.init)},
          {"defects", r.defects},
          {"assignment", r.assignment}};
}

SolveReport report_from_json(const json& j) {
  SolveReport r;
  try {
    r.J_history = vec_from(at(j, "J_history"));
    r.classification = classification_from_string(get_at<std::string>(j, "classification"));
    r.init = init_from_string(get_or<std::string>(j, "init", "auto"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  r.diagnostics = diagnostics_from_json(at(j, "diagnostics"));
  r.iterations = get_at<int>(j, "iterations");
  r.stagnated = get_or<bool>(j, "stagnated", false);
  r.tol_J = num_at(j, "tol_J");
  r.data_count = get_or<std::size_t>(j, "data_count", 0);
  r.defects = get_or<std::vector<std::string>>(j, "defects", {});
  r.assignment = get_or<std::vector<std::size_t>>(j, "assignment", {});
  return r;
}

json to_json(const StudyTable& t) {
  json rows = json::array();
  for (const StudyRow& r : t.rows) {
    rows.push_back({{"count", r.count},
                    {"J", number(r.J)},
                    {"l2_error", number(r.l2_error)},
                    {"delta_gap", number(r.delta_gap)},
                    {"curl_residual", number(r.curl_residual)},
                    {"div_residual", number(r.div_residual)},
                    {"classification", to_string(r.classification)},
                    {"iterations", r.iterations},
                    {"J_monotone", r.J_monotone}});
  }
  return {{"noise", number(t.noise)},
          {"seed", t.seed},
          {"classical_energy", number(t.classical_energy)},
          {"classical_l2", number(t.classical_l2)},
          {"box", to_json(t.box)},
          {"rows", rows}};
}

StudyTable study_from_json(const json& j) {
  StudyTable t;
  t.noise = num_at(j, "noise");
  t.seed = get_at<std::uint64_t>(j, "seed");
  t.classical_energy = num_at(j, "classical_energy");
  t.classical_l2 = num_at(j, "classical_l2");
  t.box = box_from_json(at(j, "box"));
  for (const json& r : at(j, "rows")) {
    StudyRow row;
    row.count = get_at<std::size_t>(r, "count");
    row.J = num_at(r, "J");
    row.l2_error = num_at(r, "l2_error");
    row.delta_gap = num_at(r, "delta_gap");
    row.curl_residual = num_at(r, "curl_residual");
    row.div_residual = num_at(r, "div_residual");
    try {
      row.classification = classification_from_string(get_at<std::string>(r, "classification"));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
    row.iterations = get_at<int>(r, "iterations");
    row.J_monotone = get_or<bool>(r, "J_monotone", true);
    t.rows.push_back(row);
  }
  return t;
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
    while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view f, const std::string& origin, std::size_t line) {
  if (f == "inf") return std::numeric_limits<double>::infinity();
  if (f == "-inf") return -std::numeric_limits<double>::infinity();
  if (f == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* b = f.data();
  const char* e = f.data() + f.size();
  if (!f.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (f.empty() || ec != std::errc() || ptr != e)
    throw ParseError(origin, line, "not a number: '" + std::string(f) + "'");
  return v;
}

const char* kEntryNames[2][9] = {{"11", "12", "21", "22"}, {"11", "12", "13", "21", "22", "23", "31", "32", "33"}};

void mat_header(std::ostringstream& os, const char* prefix, int n) {
  for (int k = 0; k < n * n; ++k) os << ',' << prefix << kEntryNames[n - 2][k];
}

void mat_row(std::ostringstream& os, const Mat& m) {
  for (double x : m.data()) os << ',' << format_double(x);
}

}  // namespace

std::string dataset_csv(const LocalDataSet& d) {
  std::ostringstream os;
  const int n = d.dim();
  os << "n,kind\n" << n << ',' << (d.is_graph() ? "graph" : "cloud") << '\n';
  std::ostringstream header;
  mat_header(header, "F", n);
  mat_header(header, "P", n);
  os << header.str().substr(1) << '\n';
  for (const PhasePoint& z : d.points()) {
    std::ostringstream row;
    mat_row(row, z.F);
    mat_row(row, z.P);
    os << row.str().substr(1) << '\n';
  }
  return os.str();
}

LocalDataSet parse_dataset_csv(std::string_view text, const std::string& origin, const DataSetMetadata* meta) {
  const std::vector<std::string_view> lines = split_lines(text);
  if (lines.size() < 2 || split_fields(lines[0]) != std::vector<std::string_view>{"n", "kind"})
    throw ParseError(origin, 1, "expected header 'n,kind'");
  const auto head = split_fields(lines[1]);
  if (head.size() != 2) throw ParseError(origin, 2, "expected '<n>,<kind>'");
  const double nd = parse_number(head[0], origin, 2);
  if (nd != 2.0 && nd != 3.0) throw ParseError(origin, 2, "n must be 2 or 3");
  const int n = static_cast<int>(nd);
  const std::string kind(head[1]);
  if (kind != "cloud" && kind != "graph") throw ParseError(origin, 2, "kind must be 'cloud' or 'graph'");
  const std::size_t width = 2 * static_cast<std::size_t>(n * n);
  if (lines.size() >= 3 && split_fields(lines[2]).size() != width)
    throw ParseError(origin, 3, "column header must list " + std::to_string(width) + " columns");

  std::vector<PhasePoint> pts;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != width)
      throw ParseError(origin, i + 1, "expected " + std::to_string(width) + " values, got " + std::to_string(fields.size()));
    std::vector<double> v;
    for (auto f : fields) {
      v.push_back(parse_number(f, origin, i + 1));
      if (!std::isfinite(v.back())) throw ParseError(origin, i + 1, "non-finite value");
    }
    pts.push_back({Mat(n, std::span<const double>(v.data(), n * n)), Mat(n, std::span<const double>(v.data() + n * n, n * n))});
  }

  if (kind == "graph") {
    if (!pts.empty()) throw ParseError(origin, 4, "graph data sets carry no rows");
    if (!meta || !meta->model) throw ParseError(origin, 2, "graph data set needs a model in its metadata sidecar");
    LocalDataSet d = LocalDataSet::graph(*meta->model);
    d.metadata() = *meta;
    return d;
  }
  DataSetMetadata m;
  if (meta) {
    m = *meta;
  } else {
    m.source = "file";
    m.base_count = pts.size();
  }
  return LocalDataSet::cloud(n, std::move(pts), std::move(m));
}

std::filesystem::path metadata_path(const std::filesystem::path& csv) { return csv.string() + ".json"; }

void write_dataset(const std::filesystem::path& csv, const LocalDataSet& d) {
  write_atomic(metadata_path(csv), dump(to_json(d.metadata())));
  write_atomic(csv, dataset_csv(d));
}

LocalDataSet read_dataset(const std::filesystem::path& csv) {
  const std::string text = read_text(csv);
  const std::filesystem::path side = metadata_path(csv);
  if (std::filesystem::exists(side)) {
    const json j = read_json(side);
    DataSetMetadata meta;
    try {
      meta = metadata_from_json(j);
    } catch (const std::exception& e) {
      throw ParseError(side.string() + ": " + e.what());
    }
    return parse_dataset_csv(text, csv.string(), &meta);
  }
  return parse_dataset_csv(text, csv.string());
}

std::string element_csv(const ElementFields& f, const std::vector<PhasePoint>& data_branch) {
  const bool with_data = !data_branch.empty();
  std::ostringstream os;
  os << "element";
  mat_header(os, "F", 2);
  mat_header(os, "P", 2);
  if (with_data) {
    mat_header(os, "Fd", 2);
    mat_header(os, "Pd", 2);
  }
  os << '\n';
  for (std::size_t e = 0; e < f.F.size(); ++e) {
    os << e;
    mat_row(os, f.F[e]);
    mat_row(os, e < f.P.size() ? f.P[e] : Mat(2));
    if (with_data) {
      mat_row(os, data_branch[e].F);
      mat_row(os, data_branch[e].P);
    }
    os << '\n';
  }
  return os.str();
}

std::string node_csv(const MeshProblem& mp, const ElementFields& f) {
  std::ostringstream os;
  os << "node,x,y,u1,u2\n";
  for (std::size_t k = 0; k < f.u.size(); ++k) {
    const Vec2& x = mp.mesh().nodes[k];
    os << k << ',' << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(f.u[k][0]) << ','
       << format_double(f.u[k][1]) << '\n';
  }
  return os.str();
}

std::string study_csv(const StudyTable& t) {
  std::ostringstream os;
  os << "count,J,l2_error,delta_gap,curl_residual,div_residual,iterations,strong\n";
  for (const StudyRow& r : t.rows) {
    os << r.count << ',' << format_double(r.J) << ',' << format_double(r.l2_error) << ',' << format_double(r.delta_gap)
       << ',' << format_double(r.curl_residual) << ',' << format_double(r.div_residual) << ',' << r.iterations << ','
       << (r.classification == Classification::kStrong ? 1 : 0) << '\n';
  }
  return os.str();
}

NumericTable parse_numeric_csv(std::string_view text, const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(origin, 1, "empty CSV");
  NumericTable t;
  for (auto f : split_fields(lines[0])) t.columns.emplace_back(f);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != t.columns.size())
      throw ParseError(origin, i + 1, "expected " + std::to_string(t.columns.size()) + " values");
    std::vector<double> row;
    for (auto f : fields) row.push_back(parse_number(f, origin, i + 1));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ddfe::io
