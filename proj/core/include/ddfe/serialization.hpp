#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ddfe/certificates.hpp"
#include "ddfe/dd_solver.hpp"
#include "ddfe/fem.hpp"
#include "ddfe/material_data.hpp"
#include "ddfe/material_models.hpp"
#include "json.hpp"

namespace ddfe::io {

using json = nlohmann::json;

/// Malformed input; the message carries "origin:line: ..." when a line is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& origin, std::size_t line, const std::string& what);
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// File system failure (missing input, unwritable output).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- files

std::string read_text(const std::filesystem::path& path);
/// Writes to a temporary file next to `path`, then renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);
/// Parses JSON, reporting syntax errors with their line number.
json parse_json(std::string_view text, const std::string& origin = "<json>");
json read_json(const std::filesystem::path& path);
/// Compact, key-sorted, newline-terminated dump.
std::string dump(const json& j);

/// 17 significant digits; exactly invertible by std::strtod.
std::string format_double(double x);
/// Numbers as JSON numbers; inf/nan as the strings "inf", "-inf", "nan".
json number(double x);
double to_double(const json& j);

// ---------------------------------------------------------------- JSON

json to_json(const Mat& m);
Mat mat_from_json(const json& j, int n = 0);

json to_json(const ConvexScalarG& g);
ConvexScalarG g_from_json(const json& j);
json to_json(const EnergyModel& m);
EnergyModel model_from_json(const json& j);

json to_json(const DeviationPair& d);
DeviationPair deviation_from_json(const json& j);
json to_json(const SamplingBox& b);
SamplingBox box_from_json(const json& j);
json to_json(const DataSetMetadata& m);
DataSetMetadata metadata_from_json(const json& j);

json to_json(const Witness& w);
Witness witness_from_json(const json& j);
json to_json(const Certificate& c);
Certificate certificate_from_json(const json& j);
json to_json(const CstarConstants& k);

json to_json(const Mesh& m);
Mesh mesh_from_json(const json& j);
json to_json(const BoundaryConditions& bc);
BoundaryConditions bc_from_json(const json& j);

json to_json(const DDConfig& c);
/// "seed" is mandatory; every other key has a default.
DDConfig ddconfig_from_json(const json& j);
json to_json(const Diagnostics& d);
Diagnostics diagnostics_from_json(const json& j);
/// J history, classification, diagnostics and scalars; fields go to CSV.
json to_json(const SolveReport& r);
SolveReport report_from_json(const json& j);

json to_json(const StudyTable& t);
StudyTable study_from_json(const json& j);

// ---------------------------------------------------------------- CSV

/// Line 1 `n,kind`, line 2 their values, line 3 column names, then one row of
/// 2n^2 values (F row-major, P row-major) per point. A graph data set has no
/// rows and needs its model in the metadata sidecar.
std::string dataset_csv(const LocalDataSet& d);
LocalDataSet parse_dataset_csv(std::string_view text, const std::string& origin,
                               const DataSetMetadata* meta = nullptr);

/// Sidecar path: `<csv path>.json`.
std::filesystem::path metadata_path(const std::filesystem::path& csv);
void write_dataset(const std::filesystem::path& csv, const LocalDataSet& d);
/// The sidecar is optional; without it the metadata source is "file".
LocalDataSet read_dataset(const std::filesystem::path& csv);

/// element,F11..,P11..[,F'11..,P'11..]; data_branch may be empty.
std::string element_csv(const ElementFields& f, const std::vector<PhasePoint>& data_branch = {});
/// node,x,y,u1,u2
std::string node_csv(const MeshProblem& mp, const ElementFields& f);
std::string study_csv(const StudyTable& t);

/// Generic numeric CSV reader: header row then rows of numbers.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
NumericTable parse_numeric_csv(std::string_view text, const std::string& origin);

}  // namespace ddfe::io
