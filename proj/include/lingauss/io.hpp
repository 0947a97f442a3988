// File formats: model specs (JSON), measurement and input series (CSV),
// reports, iterate logs and filter traces (JSON).
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lingauss/bench.hpp"
#include "lingauss/simulate.hpp"

namespace lingauss::io {

using nlohmann::json;

/// Model files are either an explicit spec
///   {"n_x", "n_y", "n_alpha", "N",
///    "A"|"b"|"C"|"Q"|"R": {"time_varying": bool, "basis": [[M0, M1, ...], ...]},
///    "x0_mean", "x0_cov",
///    "constraints": {"lower", "upper", "linear": {"G", "g"}}}
/// with row-major nested-array matrices and null for infinite bounds, or a
/// builder reference {"builder": "random_walk"|"underdetermined"|"heat_transfer",
/// "N", "inputs": "<csv>", "input_seed"}. A time-invariant family's basis holds
/// a single entry. `N_override` replaces the horizon of builder models.
ModelSpec ModelFromJson(const json& j, const std::filesystem::path& base_dir = {},
                        std::optional<int> N_override = std::nullopt);
json ModelToJson(const ModelSpec& spec);

/// `arg` is a path to a model file or a builder name.
ModelSpec LoadModel(const std::string& arg, std::optional<int> N = std::nullopt,
                    std::uint64_t input_seed = 0,
                    const std::optional<std::string>& inputs_csv = std::nullopt);

/// Header `t,y_1,...,y_{n_y}`, one row per k, 17 significant digits.
std::string SeriesToCsv(const MeasurementSeries& series);
MeasurementSeries SeriesFromCsv(const std::string& text);
void WriteSeriesCsv(const std::filesystem::path& path, const MeasurementSeries& series);
MeasurementSeries ReadSeriesCsv(const std::filesystem::path& path);

/// Header `t,<channel>,...`.
std::string InputsToCsv(const InputProfile& inputs);
InputProfile InputsFromCsv(const std::string& text);

json VectorToJson(const Vector& v);
Vector VectorFromJson(const json& j);
json MatrixToJson(const Matrix& m);
Matrix MatrixFromJson(const json& j);

json ResultToJson(const EstimationResult& result, const ModelSpec& spec);
json TraceToJson(const FilterTrace& trace);
json ReportToJson(const ExperimentReport& report);
json ExpectationToJson(const ExpectationCheck& check);
/// Columns grid, then <method>_raw and <method>_norm per method.
std::string LandscapeToCsv(const LandscapeTable& table);
/// One row per (N, method) with MSEs and group MSEs.
std::string MseTableToCsv(const ExperimentReport& report);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& text);

/// Parses "0.5,1,2" into a vector.
Vector ParseCsvVector(const std::string& text);
/// "lo:hi:step" into an inclusive grid.
std::vector<double> ParseRange(const std::string& text);

/// Round-trip formatting (17 significant digits).
std::string FormatDouble(double v);

}  // namespace lingauss::io
