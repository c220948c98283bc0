#include "ddfe_cli/cli.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ddfe/certificates.hpp"
#include "ddfe/dd_solver.hpp"
#include "ddfe/fem.hpp"
#include "ddfe/material_data.hpp"
#include "ddfe/serialization.hpp"

namespace ddfe::cli {
namespace {

using io::json;

struct MeshOptions {
  std::string mesh;
  int square = 0;
  std::string dirichlet = "left,right";
  std::string mesh_out;
  std::string bc;
};

void add_mesh_options(CLI::App* app, MeshOptions& o, bool bc_required) {
  app->add_option("--mesh", o.mesh, "Mesh JSON file")->check(CLI::ExistingFile);
  app->add_option("--square", o.square, "Use the built-in N x N unit-square mesh instead of --mesh")
      ->check(CLI::PositiveNumber);
  app->add_option("--dirichlet", o.dirichlet, "Dirichlet sides of the --square mesh (comma separated)")
      ->capture_default_str();
  app->add_option("--mesh-out", o.mesh_out, "Also write the mesh as JSON");
  auto* bc = app->add_option("--bc", o.bc, "Boundary-condition JSON file")->check(CLI::ExistingFile);
  if (bc_required) bc->required();
}

Mesh load_mesh(const MeshOptions& o) {
  if (o.mesh.empty() == (o.square == 0)) throw CLI::ValidationError("give exactly one of --mesh and --square");
  Mesh m;
  if (o.square > 0) {
    std::set<Side> sides;
    std::stringstream ss(o.dirichlet);
    for (std::string s; std::getline(ss, s, ',');)
      if (!s.empty()) sides.insert(side_from_string(s));
    m = square_mesh(o.square, sides);
  } else {
    try {
      m = io::mesh_from_json(io::read_json(o.mesh));
    } catch (const io::ParseError& e) {
      throw io::ParseError(o.mesh + ": " + e.what());
    }
  }
  if (!o.mesh_out.empty()) io::write_atomic(o.mesh_out, io::dump(io::to_json(m)));
  return m;
}

BoundaryConditions load_bc(const std::string& path) {
  if (path.empty()) return {};
  try {
    return io::bc_from_json(io::read_json(path));
  } catch (const io::ParseError& e) {
    if (std::string(e.what()).rfind(path, 0) == 0) throw;
    throw io::ParseError(path + ": " + e.what());
  }
}

EnergyModel load_model(const std::string& path) {
  try {
    return io::model_from_json(io::read_json(path));
  } catch (const io::ParseError& e) {
    if (std::string(e.what()).rfind(path, 0) == 0) throw;
    throw io::ParseError(path + ": " + e.what());
  }
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    io::write_atomic(path, content);
  }
}

std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

// ---------------------------------------------------------------- gen-data

struct GenData {
  std::string model, out;
  std::size_t count = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool filter_mb = false;
  double filter_tol = 1e-10;
  bool filter_det = false;
  int augment = 1;
  double half_width = 0.5;
  std::string box;
};

int gen_data(const GenData& o, int verbosity, std::ostream& err) {
  const EnergyModel m = load_model(o.model);
  SamplingBox box = SamplingBox::around(Mat::identity(m.dim()), o.half_width);
  if (!o.box.empty()) box = io::box_from_json(io::read_json(o.box));
  LocalDataSet d = sample_graph(m, box, o.count, o.noise, o.seed, o.filter_det);
  if (o.filter_mb) d = filter_moment_equilibrium(d, o.filter_tol);
  if (o.augment > 1) d = augment_orbit(d, o.augment);
  io::write_dataset(o.out, d);
  if (verbosity > 0) {
    err << "wrote " << d.size() << " points to " << o.out << " (metadata " << io::metadata_path(o.out).string()
        << ")\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- certify

double default_exponent(const EnergyModel& m) { return m.dim() == 2 ? 4.0 : 6.0; }

struct Certify {
  std::string model, data, property, out;
  std::uint64_t budget = 100000;
  std::uint64_t seed = 0;
  std::optional<double> p;
  int grid = 16;
  std::optional<double> c_prime;
};

int certify(const Certify& o, int verbosity, std::ostream& out, std::ostream& err) {
  const Property prop = property_from_string(o.property);
  const bool data_property = prop == Property::kFrameIndifference || prop == Property::kMomentEquilibrium;
  std::optional<EnergyModel> model;
  if (!o.model.empty()) model = load_model(o.model);
  Certificate c;
  if (data_property) {
    if (o.data.empty() == !model.has_value()) throw CLI::ValidationError("give exactly one of --data and --model");
    const LocalDataSet d = o.data.empty() ? LocalDataSet::graph(*model) : io::read_dataset(o.data);
    c = prop == Property::kFrameIndifference ? check_frame_indifference(d, o.budget, o.seed)
                                             : check_moment_equilibrium(d, o.budget, o.seed);
  } else {
    if (!model) throw CLI::ValidationError("--model is required for property " + o.property);
    const double p = o.p.value_or(default_exponent(*model));
    switch (prop) {
      case Property::kCoercivity: c = check_coercivity(stress_function(*model), p, o.budget, o.seed); break;
      case Property::kGrowth: c = check_growth(stress_function(*model), p, o.budget, o.seed); break;
      case Property::kPolymonotone2d: c = check_polymonotone_2d(*model, o.budget, o.seed); break;
      case Property::kPolymonotone3d: c = check_polymonotone_3d(*model, o.budget, o.seed, o.c_prime); break;
      case Property::kQuasimonotone: {
        double cp = 0.0;
        if (model->dim() == 3) cp = o.c_prime ? *o.c_prime : estimate_cstar_constants(o.seed, 20000).c_prime;
        c = check_quasimonotone(stress_function(*model), model->dim(), polymonotone_gap(*model, cp), o.grid, o.budget,
                                o.seed);
        if (model->dim() == 3) c.constants_used["c_prime"] = cp;
        break;
      }
      default: break;
    }
  }
  emit(o.out, io::dump(io::to_json(c)), out);
  if (verbosity > 0) err << to_string(c.property) << ": " << to_string(c.verdict) << " after " << c.samples_tested << " samples\n";
  return c.violated() ? kViolated : kOk;
}

// ---------------------------------------------------------------- solvers

struct SolveDD {
  MeshOptions mesh;
  std::string data, config, out, fields;
};

int solve_dd_cmd(const SolveDD& o, int verbosity, std::ostream& out, std::ostream& err) {
  const MeshProblem mp(load_mesh(o.mesh), load_bc(o.mesh.bc));
  const LocalDataSet d = io::read_dataset(o.data);
  DDConfig cfg;
  try {
    cfg = io::ddconfig_from_json(io::read_json(o.config));
  } catch (const io::ParseError& e) {
    if (std::string(e.what()).rfind(o.config, 0) == 0) throw;
    throw io::ParseError(o.config + ": " + e.what());
  }
  const SolveReport r = solve_dd(mp, d, cfg);
  emit(o.out, io::dump(io::to_json(r)), out);
  const std::string prefix = !o.fields.empty() ? o.fields : (o.out.empty() || o.out == "-") ? std::string() : o.out;
  if (!prefix.empty()) {
    io::write_atomic(sibling(prefix, ".elements.csv"), io::element_csv(r.fields, r.data_branch));
    io::write_atomic(sibling(prefix, ".nodes.csv"), io::node_csv(mp, r.fields));
  }
  if (verbosity > 0) {
    err << "classification " << to_string(r.classification) << ", J = " << io::format_double(r.final_J()) << " after "
        << r.iterations << " iterations (" << r.wall_time_s << " s)\n";
  }
  for (const std::string& defect : r.defects) err << "defect: " << defect << "\n";
  return r.classification == Classification::kNonConverged ? kNotConverged : kOk;
}

struct SolveClassical {
  MeshOptions mesh;
  std::string model, out, nodes_out, summary;
  double tol = 1e-10;
  int max_iter = 100;
};

int solve_classical_cmd(const SolveClassical& o, int verbosity, std::ostream& out, std::ostream& err) {
  const MeshProblem mp(load_mesh(o.mesh), load_bc(o.mesh.bc));
  const EnergyModel m = load_model(o.model);
  ClassicalSolution s;
  try {
    s = solve_classical(mp, m, o.tol, o.max_iter);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    json h = json::array();
    for (double r : e.residual_history()) h.push_back(io::number(r));
    err << "residual history: " << h.dump() << "\n";
    return kNotConverged;
  }
  emit(o.out, io::element_csv(s.fields), out);
  if (!o.nodes_out.empty()) io::write_atomic(o.nodes_out, io::node_csv(mp, s.fields));
  json hist = json::array();
  for (double r : s.residual_history) hist.push_back(io::number(r));
  const json summary{{"energy", io::number(s.energy)}, {"iterations", s.iterations}, {"residual_history", hist}};
  if (!o.summary.empty()) io::write_atomic(o.summary, io::dump(summary));
  if (verbosity > 0) {
    err << "converged in " << s.iterations << " Newton steps, residual "
        << io::format_double(s.residual_history.back()) << ", energy " << io::format_double(s.energy) << "\n";
  }
  return kOk;
}

struct Study {
  MeshOptions mesh;
  std::string model, counts = "100,1000,10000", out, csv, config;
  double noise = 0.0;
  double stretch = 0.04;
  std::uint64_t seed = 0;
};

int study_cmd(const Study& o, int verbosity, std::ostream& out, std::ostream& err) {
  MeshOptions mo = o.mesh;
  if (mo.mesh.empty() && mo.square == 0) mo.square = 8;
  const BoundaryConditions bc = mo.bc.empty() ? uniaxial_stretch(o.stretch) : load_bc(mo.bc);
  const MeshProblem mp(load_mesh(mo), bc);
  const EnergyModel m = load_model(o.model);
  std::vector<std::size_t> counts;
  std::stringstream ss(o.counts);
  for (std::string s; std::getline(ss, s, ',');) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size() || v == 0) throw std::invalid_argument(s);
      counts.push_back(v);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--counts must be a comma-separated list of positive integers");
    }
  }
  DDConfig base;
  if (!o.config.empty()) base = io::ddconfig_from_json(io::read_json(o.config));
  const StudyTable t = study_convergence(mp, m, counts, o.noise, o.seed, base);
  emit(o.out, io::dump(io::to_json(t)), out);
  if (!o.csv.empty()) io::write_atomic(o.csv, io::study_csv(t));
  if (verbosity > 0)
    for (const StudyRow& r : t.rows)
      err << "N = " << r.count << ": J = " << io::format_double(r.J) << ", " << to_string(r.classification) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- report

struct Report {
  std::vector<std::string> inputs;
  std::string format = "markdown";
  std::string out;
};

struct SummaryRow {
  std::string source;
  std::size_t count = 0;
  double J = 0.0;
  std::string classification;
  double delta_gap = 0.0, curl = 0.0, div = 0.0;
  int iterations = 0;
};

int report_cmd(const Report& o, std::ostream& out) {
  if (o.inputs.empty()) throw CLI::ValidationError("report needs at least one input file");
  std::vector<SummaryRow> rows;
  for (const std::string& path : o.inputs) {
    const json j = io::read_json(path);
    try {
      if (j.contains("rows")) {
        const StudyTable t = io::study_from_json(j);
        for (const StudyRow& r : t.rows)
          rows.push_back({path, r.count, r.J, to_string(r.classification), r.delta_gap, r.curl_residual, r.div_residual,
                          r.iterations});
      } else {
        const SolveReport r = io::report_from_json(j);
        rows.push_back({path, r.data_count, r.final_J(), to_string(r.classification), r.diagnostics.delta_gap,
                        r.diagnostics.curl_residual, r.diagnostics.div_residual, r.iterations});
      }
    } catch (const io::ParseError& e) {
      throw io::ParseError(path + ": schema mismatch: " + e.what());
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.count < b.count; });
  std::vector<bool> ok(rows.size(), true);
  bool all_ok = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ok[i] = rows[i].J <= rows[i - 1].J;
    all_ok = all_ok && ok[i];
  }

  std::ostringstream os;
  const bool md = o.format == "markdown";
  if (md) {
    os << "| source | data_count | J | classification | delta_gap | curl_residual | div_residual | iterations | "
          "J_nonincreasing |\n";
    os << "|---|---|---|---|---|---|---|---|---|\n";
  } else {
    os << "source,data_count,J,classification,delta_gap,curl_residual,div_residual,iterations,J_nonincreasing\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SummaryRow& r = rows[i];
    const char* sep = md ? " | " : ",";
    if (md) os << "| ";
    os << r.source << sep << r.count << sep << io::format_double(r.J) << sep << r.classification << sep
       << io::format_double(r.delta_gap) << sep << io::format_double(r.curl) << sep << io::format_double(r.div) << sep
       << r.iterations << sep << (ok[i] ? "yes" : "no");
    os << (md ? " |\n" : "\n");
  }
  if (md) os << "\nJ non-increasing in data count: " << (all_ok ? "yes" : "no") << "\n";
  emit(o.out, os.str(), out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-driven finite elasticity: data generation, certification and solvers", "ddfe"};
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "Progress messages on stderr (repeatable)");
  app.footer("Exit codes: 0 success, 1 usage/IO/parse error, 2 certificate violated, 3 solver did not converge.\n"
             "Environment: DDFE_NUM_THREADS sets the worker count.");

  GenData gd;
  auto* gen = app.add_subcommand("gen-data", "Sample a stress graph into a CSV data set with a JSON metadata sidecar");
  gen->add_option("--model", gd.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  gen->add_option("--count", gd.count, "Number of base samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--noise", gd.noise, "Relative stress noise (RMS norm |eps| = noise |T(F)|)")->capture_default_str();
  gen->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
  gen->add_flag("--filter-mb", gd.filter_mb, "Keep only moment-equilibrated points");
  gen->add_option("--filter-tol", gd.filter_tol, "Tolerance of --filter-mb, relative to 1 + |F||P|")->capture_default_str();
  gen->add_flag("--filter-det", gd.filter_det, "Reject samples with det F <= 0");
  gen->add_option("--augment", gd.augment, "Orbit augmentation: rotated copies per point")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--half-width", gd.half_width, "Sampling box half width around the identity")->capture_default_str();
  gen->add_option("--box", gd.box, "Sampling box JSON {\"center\": [...], \"half_width\": [...]}")->check(CLI::ExistingFile);
  gen->add_option("--out", gd.out, "Output CSV (metadata goes to <out>.json)")->required();

  Certify ce;
  auto* cert = app.add_subcommand("certify", "Falsification search for one material-law property");
  cert->add_option("--model", ce.model, "Model JSON file")->check(CLI::ExistingFile);
  cert->add_option("--data", ce.data, "Data set CSV (frame_indifference, moment_equilibrium)")->check(CLI::ExistingFile);
  cert->add_option("--property", ce.property,
                   "coercivity, polymonotonicity_2d, polymonotonicity_3d, quasimonotonicity, growth, "
                   "frame_indifference or moment_equilibrium")
      ->required();
  cert->add_option("--budget", ce.budget, "Number of samples")->capture_default_str();
  cert->add_option("--seed", ce.seed, "Random seed")->capture_default_str();
  cert->add_option("--p", ce.p, "Exponent for coercivity/growth (default 4 in 2D, 6 in 3D)");
  cert->add_option("--grid", ce.grid, "Quadrature grid for quasimonotonicity")->capture_default_str();
  cert->add_option("--c-prime", ce.c_prime, "3D gap constant c' (estimated when omitted)");
  cert->add_option("--out", ce.out, "Certificate JSON (stdout when omitted)");

  SolveDD sd;
  auto* sdd = app.add_subcommand("solve-dd", "Data-driven solve by alternating projections");
  add_mesh_options(sdd, sd.mesh, false);
  sdd->add_option("--data", sd.data, "Data set CSV")->required()->check(CLI::ExistingFile);
  sdd->add_option("--config", sd.config, "Solver config JSON (seed is mandatory)")->required()->check(CLI::ExistingFile);
  sdd->add_option("--out", sd.out, "Report JSON (stdout when omitted)");
  sdd->add_option("--fields", sd.fields, "Prefix for <prefix>.elements.csv and <prefix>.nodes.csv (default: --out)");

  SolveClassical sc;
  auto* scl = app.add_subcommand("solve-classical", "Newton solve of the hyperelastic problem");
  add_mesh_options(scl, sc.mesh, false);
  scl->add_option("--model", sc.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  scl->add_option("--tol", sc.tol, "Residual tolerance")->capture_default_str();
  scl->add_option("--max-iter", sc.max_iter, "Newton iteration limit")->capture_default_str();
  scl->add_option("--out", sc.out, "Element fields CSV (stdout when omitted)");
  scl->add_option("--nodes-out", sc.nodes_out, "Nodal displacement CSV");
  scl->add_option("--summary", sc.summary, "Energy and residual history JSON");

  Study st;
  auto* stu = app.add_subcommand("study-convergence", "DD solves against growing graph samples");
  add_mesh_options(stu, st.mesh, false);
  stu->add_option("--model", st.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  stu->add_option("--counts", st.counts, "Comma-separated sample counts")->capture_default_str();
  stu->add_option("--noise", st.noise, "Relative stress noise")->capture_default_str();
  stu->add_option("--seed", st.seed, "Random seed")->capture_default_str();
  stu->add_option("--stretch", st.stretch, "Uniaxial stretch used when --bc is omitted")->capture_default_str();
  stu->add_option("--config", st.config, "Solver config JSON");
  stu->add_option("--out", st.out, "Study JSON (stdout when omitted)");
  stu->add_option("--csv", st.csv, "Study table CSV");

  Report rp;
  auto* rep = app.add_subcommand("report", "Summarize solve-dd reports and study tables");
  rep->add_option("inputs", rp.inputs, "Report or study JSON files")->check(CLI::ExistingFile);
  rep->add_option("--format", rp.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}))->capture_default_str();
  rep->add_option("--out", rp.out, "Output file (stdout when omitted)");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("ddfe");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) return gen_data(gd, verbosity, err);
    if (cert->parsed()) return certify(ce, verbosity, out, err);
    if (sdd->parsed()) return solve_dd_cmd(sd, verbosity, out, err);
    if (scl->parsed()) return solve_classical_cmd(sc, verbosity, out, err);
    if (stu->parsed()) return study_cmd(st, verbosity, out, err);
    if (rep->parsed()) return report_cmd(rp, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace ddfe::cli
