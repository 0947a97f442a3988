#include "lingauss/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lingauss/examples.hpp"

namespace lingauss::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> SplitFields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

double ParseDouble(const std::string& s) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> DataLines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

AffineMatrixFamily FamilyFromJson(const json& j, int n_alpha) {
  const bool tv = j.value("time_varying", false);
  const json& basis = j.at("basis");
  if (!basis.is_array() || basis.empty()) {
    throw std::invalid_argument("family basis must be a non-empty array");
  }
  std::vector<std::vector<Matrix>> entries;
  for (const auto& entry : basis) {
    std::vector<Matrix> mats;
    for (const auto& m : entry) mats.push_back(MatrixFromJson(m));
    if (static_cast<int>(mats.size()) != n_alpha + 1) {
      throw std::invalid_argument("each basis entry needs n_alpha + 1 matrices");
    }
    entries.push_back(std::move(mats));
  }
  const int rows = static_cast<int>(entries[0][0].rows());
  const int cols = static_cast<int>(entries[0][0].cols());
  return AffineMatrixFamily(rows, cols, tv, std::move(entries));
}

json FamilyToJson(const AffineMatrixFamily& f) {
  json basis = json::array();
  for (const auto& entry : f.basis()) {
    json e = json::array();
    for (const auto& m : entry) e.push_back(MatrixToJson(m));
    basis.push_back(std::move(e));
  }
  return {{"time_varying", f.time_varying()}, {"basis", std::move(basis)}};
}

json BoundToJson(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      out.push_back(v[i]);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Vector BoundFromJson(const json& j, double missing) {
  Vector v(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v[static_cast<int>(i)] = j[i].is_null() ? missing : j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

json VectorToJson(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector VectorFromJson(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array for a vector");
  Vector v(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json MatrixToJson(const Matrix& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix MatrixFromJson(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix must be a nested array");
  // A flat array is read as a column vector.
  if (!j[0].is_array()) {
    Matrix m(static_cast<int>(j.size()), 1);
    for (size_t r = 0; r < j.size(); ++r) m(static_cast<int>(r), 0) = j[r].get<double>();
    return m;
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) throw std::invalid_argument("ragged matrix");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

ModelSpec ModelFromJson(const json& j, const std::filesystem::path& base_dir,
                        std::optional<int> N_override) {
  if (j.contains("builder")) {
    const std::string name = j.at("builder").get<std::string>();
    const int N = N_override ? *N_override : j.value("N", 0);
    if (name == "heat_transfer" && j.contains("inputs")) {
      std::filesystem::path p = j.at("inputs").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      InputProfile inputs = InputsFromCsv(ReadFile(p));
      if (N_override && *N_override != inputs.length()) {
        throw std::invalid_argument("inputs file length does not match the requested horizon");
      }
      return BuildHeatTransfer(inputs);
    }
    return BuildNamedModel(name, N, j.value("input_seed", std::uint64_t{0}));
  }

  ModelSpec spec;
  spec.n_x = j.at("n_x").get<int>();
  spec.n_y = j.at("n_y").get<int>();
  spec.n_alpha = j.at("n_alpha").get<int>();
  spec.N = j.at("N").get<int>();
  spec.A = FamilyFromJson(j.at("A"), spec.n_alpha);
  spec.b = FamilyFromJson(j.at("b"), spec.n_alpha);
  spec.C = FamilyFromJson(j.at("C"), spec.n_alpha);
  spec.Q = FamilyFromJson(j.at("Q"), spec.n_alpha);
  spec.R = FamilyFromJson(j.at("R"), spec.n_alpha);
  spec.x0_mean = VectorFromJson(j.at("x0_mean"));
  spec.x0_cov = MatrixFromJson(j.at("x0_cov"));
  if (j.contains("constraints")) {
    const json& c = j.at("constraints");
    if (c.contains("lower") && !c.at("lower").is_null()) {
      spec.constraints.lower = BoundFromJson(c.at("lower"), -kInf);
    }
    if (c.contains("upper") && !c.at("upper").is_null()) {
      spec.constraints.upper = BoundFromJson(c.at("upper"), kInf);
    }
    if (c.contains("linear") && !c.at("linear").is_null()) {
      spec.constraints.G = MatrixFromJson(c.at("linear").at("G"));
      spec.constraints.g = VectorFromJson(c.at("linear").at("g"));
    }
  }
  if (j.contains("param_names")) {
    spec.param_names = j.at("param_names").get<std::vector<std::string>>();
  }
  spec.Validate();
  return spec;
}

json ModelToJson(const ModelSpec& spec) {
  json j;
  j["n_x"] = spec.n_x;
  j["n_y"] = spec.n_y;
  j["n_alpha"] = spec.n_alpha;
  j["N"] = spec.N;
  j["A"] = FamilyToJson(spec.A);
  j["b"] = FamilyToJson(spec.b);
  j["C"] = FamilyToJson(spec.C);
  j["Q"] = FamilyToJson(spec.Q);
  j["R"] = FamilyToJson(spec.R);
  j["x0_mean"] = VectorToJson(spec.x0_mean);
  j["x0_cov"] = MatrixToJson(spec.x0_cov);
  json c = json::object();
  if (spec.constraints.lower) c["lower"] = BoundToJson(*spec.constraints.lower);
  if (spec.constraints.upper) c["upper"] = BoundToJson(*spec.constraints.upper);
  if (spec.constraints.G.rows() > 0) {
    c["linear"] = {{"G", MatrixToJson(spec.constraints.G)},
                   {"g", VectorToJson(spec.constraints.g)}};
  }
  j["constraints"] = std::move(c);
  if (!spec.param_names.empty()) j["param_names"] = spec.param_names;
  return j;
}

ModelSpec LoadModel(const std::string& arg, std::optional<int> N, std::uint64_t input_seed,
                    const std::optional<std::string>& inputs_csv) {
  if (arg == "random_walk" || arg == "underdetermined" || arg == "heat_transfer") {
    if (arg == "heat_transfer" && inputs_csv) {
      InputProfile inputs = InputsFromCsv(ReadFile(*inputs_csv));
      if (N && *N != inputs.length()) {
        throw std::invalid_argument("inputs file length does not match the requested horizon");
      }
      return BuildHeatTransfer(inputs);
    }
    if (!N) throw std::invalid_argument("builder '" + arg + "' needs a horizon (--n)");
    return BuildNamedModel(arg, *N, input_seed);
  }
  const std::filesystem::path path(arg);
  const json j = json::parse(ReadFile(path));
  return ModelFromJson(j, path.parent_path(), N);
}

std::string SeriesToCsv(const MeasurementSeries& series) {
  std::ostringstream os;
  os << 't';
  for (int i = 1; i <= series.n_y(); ++i) os << ",y_" << i;
  os << '\n';
  for (size_t k = 0; k < series.y.size(); ++k) {
    os << k;
    for (int i = 0; i < series.y[k].size(); ++i) os << ',' << FormatDouble(series.y[k][i]);
    os << '\n';
  }
  return os.str();
}

MeasurementSeries SeriesFromCsv(const std::string& text) {
  const auto lines = DataLines(text);
  if (lines.empty()) throw std::invalid_argument("data file is empty");
  const auto header = SplitFields(lines[0]);
  if (header.size() < 2 || header[0] != "t") {
    throw std::invalid_argument("data header must be 't,y_1,...'");
  }
  const int ny = static_cast<int>(header.size()) - 1;
  MeasurementSeries series;
  for (size_t l = 1; l < lines.size(); ++l) {
    const auto fields = SplitFields(lines[l]);
    if (static_cast<int>(fields.size()) != ny + 1) {
      throw std::invalid_argument("data row " + std::to_string(l) + " has wrong field count");
    }
    if (static_cast<size_t>(ParseDouble(fields[0])) != l - 1) {
      throw std::invalid_argument("data rows must be ordered t = 0, 1, ...");
    }
    Vector y(ny);
    for (int i = 0; i < ny; ++i) y[i] = ParseDouble(fields[i + 1]);
    if (!y.allFinite()) throw std::invalid_argument("data contains non-finite values");
    series.y.push_back(std::move(y));
  }
  if (series.y.empty()) throw std::invalid_argument("data file has no rows");
  return series;
}

void WriteSeriesCsv(const std::filesystem::path& path, const MeasurementSeries& series) {
  WriteFile(path, SeriesToCsv(series));
}

MeasurementSeries ReadSeriesCsv(const std::filesystem::path& path) {
  return SeriesFromCsv(ReadFile(path));
}

std::string InputsToCsv(const InputProfile& inputs) {
  std::ostringstream os;
  os << 't';
  for (const auto& n : inputs.names) os << ',' << n;
  os << '\n';
  for (int k = 0; k < inputs.length(); ++k) {
    os << k;
    for (const auto& c : inputs.channels) os << ',' << FormatDouble(c[k]);
    os << '\n';
  }
  return os.str();
}

InputProfile InputsFromCsv(const std::string& text) {
  const auto lines = DataLines(text);
  if (lines.empty()) throw std::invalid_argument("inputs file is empty");
  const auto header = SplitFields(lines[0]);
  if (header.size() < 2 || header[0] != "t") {
    throw std::invalid_argument("inputs header must be 't,<channel>,...'");
  }
  InputProfile inputs;
  inputs.names.assign(header.begin() + 1, header.end());
  inputs.channels.resize(inputs.names.size());
  for (size_t l = 1; l < lines.size(); ++l) {
    const auto fields = SplitFields(lines[l]);
    if (fields.size() != header.size()) throw std::invalid_argument("ragged inputs row");
    for (size_t c = 0; c < inputs.names.size(); ++c) {
      inputs.channels[c].push_back(ParseDouble(fields[c + 1]));
    }
  }
  return inputs;
}

json ResultToJson(const EstimationResult& result, const ModelSpec& spec) {
  json j;
  j["alpha_hat"] = VectorToJson(result.alpha_hat);
  if (!spec.param_names.empty()) j["param_names"] = spec.param_names;
  j["objective"] = result.objective;
  j["status"] = std::string(StatusName(result.status));
  j["hessian_regularized"] = result.hessian_regularized;
  if (!result.message.empty()) j["message"] = result.message;
  json its = json::array();
  for (size_t i = 0; i < result.iterates.size(); ++i) {
    const auto& it = result.iterates[i];
    json r = {{"iteration", i},         {"alpha", VectorToJson(it.alpha)},
              {"objective", it.objective}, {"step_norm", it.step_norm},
              {"merit", it.merit},         {"t", it.step_length},
              {"penalty", it.penalty},     {"kkt", it.kkt}};
    if (it.fd_gradient_error >= 0.0) r["fd_gradient_error"] = it.fd_gradient_error;
    its.push_back(std::move(r));
  }
  j["iterates"] = std::move(its);
  return j;
}

json TraceToJson(const FilterTrace& trace) {
  json steps = json::array();
  for (size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& rec = trace.steps[k];
    const auto& st = trace.states[k];
    json s = {{"k", k},
              {"x_hat", VectorToJson(st.x_hat)},
              {"P", MatrixToJson(st.P)},
              {"e", VectorToJson(rec.e)},
              {"S", MatrixToJson(rec.S)},
              {"K", MatrixToJson(rec.K)},
              {"logdet_S", rec.logdet_S}};
    if (trace.has_sensitivities()) {
      const auto& sens = trace.sensitivities[k];
      json de = json::array(), dS = json::array();
      for (size_t i = 0; i < sens.de.size(); ++i) {
        de.push_back(VectorToJson(sens.de[i]));
        dS.push_back(MatrixToJson(sens.dS[i]));
      }
      s["de"] = std::move(de);
      s["dS"] = std::move(dS);
    }
    steps.push_back(std::move(s));
  }
  return {{"steps", std::move(steps)}};
}

json ReportToJson(const ExperimentReport& report) {
  json j;
  j["experiment"] = report.name;
  j["base_seed"] = report.base_seed;
  j["m"] = report.m;
  j["Ns"] = report.Ns;
  json methods = json::array();
  for (auto m : report.methods) methods.push_back(std::string(ObjectiveName(m)));
  j["methods"] = methods;
  j["group_names"] = report.group_names;
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r = {{"N", row.N},
              {"method", std::string(ObjectiveName(row.method))},
              {"trials", row.trials},
              {"failures", row.failures},
              {"mse", row.mse},
              {"mse_including_failures", row.mse_including_failures}};
    for (size_t g = 0; g < row.group_mse.size(); ++g) {
      r["mse_" + report.group_names[g]] = row.group_mse[g];
    }
    rows.push_back(std::move(r));
  }
  j["mse"] = std::move(rows);
  json fits = json::object();
  for (const auto& [method, fit] : report.rate_fits) {
    fits[std::string(ObjectiveName(method))] = {{"slope", fit.slope}, {"constant", fit.constant}};
  }
  j["rate_fit"] = std::move(fits);
  json trials = json::array();
  for (const auto& t : report.trials) {
    trials.push_back({{"N", t.N},
                      {"trial", t.trial},
                      {"method", std::string(ObjectiveName(t.method))},
                      {"seed", t.seed},
                      {"alpha_true", VectorToJson(t.alpha_true)},
                      {"alpha_hat", VectorToJson(t.alpha_hat)},
                      {"status", std::string(StatusName(t.status))},
                      {"objective", t.objective},
                      {"objective_initial", t.objective_initial},
                      {"feasible", t.feasible}});
  }
  j["trials"] = std::move(trials);
  return j;
}

json ExpectationToJson(const ExpectationCheck& check) {
  json j;
  j["m"] = check.m;
  j["grid"] = check.grid;
  json per = json::object();
  for (size_t i = 0; i < check.methods.size(); ++i) {
    per[std::string(ObjectiveName(check.methods[i]))] = {
        {"mean_objective", check.mean_objective[i]}, {"argmin", check.argmin[i]}};
  }
  j["methods"] = std::move(per);
  return j;
}

std::string LandscapeToCsv(const LandscapeTable& table) {
  std::ostringstream os;
  os << "alpha_" << (table.param + 1);
  for (const auto& col : table.columns) {
    const std::string name(LandscapeMethodName(col.method));
    os << ',' << name << "_raw," << name << "_norm";
  }
  os << '\n';
  for (size_t g = 0; g < table.grid.size(); ++g) {
    os << FormatDouble(table.grid[g]);
    for (const auto& col : table.columns) {
      os << ',' << FormatDouble(col.raw[g]) << ',' << FormatDouble(col.normalized[g]);
    }
    os << '\n';
  }
  return os.str();
}

std::string MseTableToCsv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "N,method,trials,failures,mse,mse_including_failures";
  for (const auto& g : report.group_names) os << ",mse_" << g;
  os << '\n';
  for (const auto& row : report.rows) {
    os << row.N << ',' << ObjectiveName(row.method) << ',' << row.trials << ',' << row.failures
       << ',' << FormatDouble(row.mse) << ',' << FormatDouble(row.mse_including_failures);
    for (double v : row.group_mse) os << ',' << FormatDouble(v);
    os << '\n';
  }
  return os.str();
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

Vector ParseCsvVector(const std::string& text) {
  const auto fields = SplitFields(text);
  Vector v(static_cast<int>(fields.size()));
  for (size_t i = 0; i < fields.size(); ++i) v[static_cast<int>(i)] = ParseDouble(fields[i]);
  return v;
}

std::vector<double> ParseRange(const std::string& text) {
  const auto parts = SplitFields(text, ':');
  if (parts.size() != 3) throw std::invalid_argument("range must be lo:hi:step");
  const double lo = ParseDouble(parts[0]);
  const double hi = ParseDouble(parts[1]);
  const double step = ParseDouble(parts[2]);
  if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("range must satisfy lo <= hi, step > 0");
  const long n = std::lround(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(n + 1);
  for (long i = 0; i <= n; ++i) grid.push_back(lo + static_cast<double>(i) * step);
  return grid;
}

}  // namespace lingauss::io
