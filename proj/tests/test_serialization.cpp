#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ddfe/serialization.hpp"

using namespace ddfe;
namespace fs = std::filesystem;

namespace {

const EnergyModel kHat2 = EnergyModel::hat_w2(0.25, 0.4);

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / ("ddfe_ser_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                  "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <class T, class From>
void expect_json_round_trip(const T& value, From from) {
  const io::json j = io::to_json(value);
  const io::json again = io::to_json(from(io::parse_json(io::dump(j))));
  EXPECT_EQ(j, again);
}

}  // namespace

TEST(Serialization, DoublesRoundTripBitExactly) {
  Rng rng(61);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
    EXPECT_EQ(std::strtod(io::format_double(x).c_str(), nullptr), x);
    EXPECT_EQ(io::to_double(io::parse_json(io::dump(io::number(x)))), x);
  }
  EXPECT_EQ(io::number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::to_double("-inf"), -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isnan(io::to_double(io::number(std::nan("")))));
  EXPECT_THROW(io::to_double("seven"), io::ParseError);
}

TEST(Serialization, ModelsAndConfigsRoundTrip) {
  expect_json_round_trip(kHat2, io::model_from_json);
  expect_json_round_trip(EnergyModel::hat_w3(1, 1, 0.5), io::model_from_json);
  expect_json_round_trip(EnergyModel::w2(0.5, ConvexScalarG::table({-1, 0, 2}, {-2, 0, 1}, 0.3)), io::model_from_json);
  EXPECT_EQ(io::deviation_from_json(io::to_json(DeviationPair::power(3.0))), DeviationPair::power(3.0));
  DDConfig cfg;
  cfg.seed = 99;
  cfg.tol_J = 1e-7;
  cfg.max_outer = 17;
  cfg.init = Init::kZeroState;
  cfg.dev = DeviationPair::quadratic(2.5);
  EXPECT_EQ(io::ddconfig_from_json(io::parse_json(io::dump(io::to_json(cfg)))), cfg);
  EXPECT_THROW(io::ddconfig_from_json(io::parse_json("{\"max_outer\": 3}")), io::ParseError);
}

TEST(Serialization, MeshAndBoundaryConditionsRoundTrip) {
  const Mesh m = square_mesh(3, {Side::kLeft, Side::kBottom});
  EXPECT_EQ(io::mesh_from_json(io::parse_json(io::dump(io::to_json(m)))), m);
  BoundaryConditions bc = uniaxial_stretch(0.04);
  bc.neumann.push_back({{EdgeSelector::Kind::kList, {0, 2}, 0.0}, {0.1, -0.2}});
  bc.neumann.push_back({{EdgeSelector::Kind::kY, {}, 1.0}, {0.0, 0.3}});
  bc.body_force = {{0.5, 0.25}};
  EXPECT_EQ(io::bc_from_json(io::parse_json(io::dump(io::to_json(bc)))), bc);
  const auto sel = io::bc_from_json(io::parse_json(R"({"dirichlet":[{"edges":"all"}]})"));
  EXPECT_EQ(sel.dirichlet[0].edges.kind, EdgeSelector::Kind::kAll);
  EXPECT_EQ(sel.dirichlet[0].A, Mat::identity(2));
}

TEST(Serialization, CertificateRoundTrips) {
  const StressFunction neg{2, [](const Mat& x) { return -x; }};
  const Certificate c = check_coercivity(neg, 2.0, 500, 3);
  ASSERT_TRUE(c.witness);
  EXPECT_EQ(io::certificate_from_json(io::parse_json(io::dump(io::to_json(c)))), c);
  const Certificate ok = check_polymonotone_2d(kHat2, 500, 3);
  EXPECT_EQ(io::certificate_from_json(io::parse_json(io::dump(io::to_json(ok)))), ok);
}

TEST(Serialization, ReportAndStudyRoundTrip) {
  const MeshProblem mp(square_mesh(4, {Side::kLeft, Side::kRight}), uniaxial_stretch(0.04));
  const auto d = sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.2), 300, 0.01, 5, true);
  DDConfig cfg;
  cfg.init = Init::kRandomDataAssignment;
  const SolveReport r = solve_dd(mp, d, cfg);
  const io::json j = io::to_json(r);
  const SolveReport back = io::report_from_json(io::parse_json(io::dump(j)));
  EXPECT_EQ(back.J_history, r.J_history);
  EXPECT_EQ(back.classification, r.classification);
  EXPECT_EQ(back.diagnostics, r.diagnostics);
  EXPECT_EQ(back.assignment, r.assignment);
  EXPECT_EQ(io::to_json(back), j);

  const StudyTable t = study_convergence(mp, kHat2, {50, 200}, 0.0, 1);
  const StudyTable tb = io::study_from_json(io::parse_json(io::dump(io::to_json(t))));
  EXPECT_EQ(tb.rows, t.rows);
  EXPECT_EQ(tb.box, t.box);
  EXPECT_EQ(tb.classical_energy, t.classical_energy);
}

TEST(Serialization, DatasetCsvRoundTripsWithSidecar) {
  const fs::path dir = temp_dir();
  const auto d = augment_orbit(sample_graph(kHat2, SamplingBox::around(Mat::identity(2), 0.3), 40, 0.02, 8, true), 3);
  const fs::path csv = dir / "data.csv";
  io::write_dataset(csv, d);
  EXPECT_TRUE(fs::exists(io::metadata_path(csv)));
  const LocalDataSet back = io::read_dataset(csv);
  EXPECT_EQ(back.points(), d.points());
  EXPECT_EQ(io::to_json(back.metadata()), io::to_json(d.metadata()));
  EXPECT_EQ(io::dataset_csv(back), io::dataset_csv(d));

  const auto g = LocalDataSet::graph(kHat2);
  io::write_dataset(dir / "graph.csv", g);
  const LocalDataSet gb = io::read_dataset(dir / "graph.csv");
  EXPECT_TRUE(gb.is_graph());
  EXPECT_EQ(gb.stress()(Mat::diag({1.1, 0.9})), g.stress()(Mat::diag({1.1, 0.9})));

  // Without a sidecar the data set is still readable.
  fs::remove(io::metadata_path(csv));
  EXPECT_EQ(io::read_dataset(csv).metadata().source, "file");
  fs::remove_all(dir);
}

TEST(Serialization, ErrorsCarryLineNumbers) {
  try {
    io::parse_json("{\n  \"a\": 1,\n  \"b\": ]\n}", "cfg.json");
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("cfg.json:3:"), std::string::npos);
  }
  try {
    io::parse_dataset_csv("n,kind\n2,cloud\nF11,F12,F21,F22,P11,P12,P21,P22\n1,0,0,1,0,0,0,0\n1,0,0,1,0,0,x,0\n", "d.csv");
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(io::parse_dataset_csv("n,kind\n4,cloud\n", "d.csv"), io::ParseError);
  EXPECT_THROW(io::parse_dataset_csv("n,kind\n2,graph\nF11,F12,F21,F22,P11,P12,P21,P22\n", "d.csv"), io::ParseError);
  EXPECT_THROW(io::parse_numeric_csv("", "e.csv"), io::ParseError);
  EXPECT_THROW(io::read_text("/nonexistent/ddfe/file"), io::IoError);
}

TEST(Serialization, AtomicWriteReplacesWholeFile) {
  const fs::path dir = temp_dir();
  const fs::path p = dir / "out.json";
  io::write_atomic(p, "first version, fairly long\n");
  io::write_atomic(p, "second\n");
  EXPECT_EQ(io::read_text(p), "second\n");
  for (const auto& entry : fs::directory_iterator(dir)) EXPECT_EQ(entry.path().filename(), "out.json");
  EXPECT_THROW(io::write_atomic(dir / "missing" / "x.json", "x"), io::IoError);
  fs::remove_all(dir);
}

TEST(Serialization, FieldCsvsParseBack) {
  const MeshProblem mp(square_mesh(3, {Side::kLeft, Side::kRight}), uniaxial_stretch(0.04));
  const ClassicalSolution s = solve_classical(mp, kHat2);
  const io::NumericTable t = io::parse_numeric_csv(io::element_csv(s.fields), "e.csv");
  ASSERT_EQ(t.rows.size(), mp.element_count());
  EXPECT_EQ(t.columns.front(), "element");
  for (std::size_t e = 0; e < t.rows.size(); ++e)
    for (int k = 0; k < 4; ++k) {
      EXPECT_EQ(t.rows[e][1 + k], s.fields.F[e][k]);
      EXPECT_EQ(t.rows[e][5 + k], s.fields.P[e][k]);
    }
  const io::NumericTable n = io::parse_numeric_csv(io::node_csv(mp, s.fields), "n.csv");
  ASSERT_EQ(n.rows.size(), mp.node_count());
  EXPECT_EQ(n.rows[5][3], s.fields.u[5][0]);
}
