// lingauss: simulate, estimate, benchmark and inspect linear-Gaussian
// state-space models from the command line.
//
// Exit codes: 0 success, 1 derivative check violated, 2 bad arguments,
// 3 numerical failure (including failed estimation runs).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lingauss/bench.hpp"
#include "lingauss/diagnostics.hpp"
#include "lingauss/examples.hpp"
#include "lingauss/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lingauss;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kCheckFailed = 1, kBadArgs = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Manifest {
 public:
  explicit Manifest(std::string command)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  json& config() { return config_; }
  json& inputs() { return inputs_; }
  json& seeds() { return seeds_; }

  json ToJson() const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return {{"command", command_}, {"config", config_},   {"inputs", inputs_},
            {"seeds", seeds_},     {"version", kVersion}, {"duration_s", secs}};
  }

  // Sidecar for non-JSON outputs.
  void WriteSidecar(const fs::path& out) const {
    io::WriteFile(out.string() + ".manifest.json", ToJson().dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_ = json::object();
  json inputs_ = json::object();
  json seeds_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

bool IsBuilder(const std::string& model) {
  return model == "random_walk" || model == "underdetermined" || model == "heat_transfer";
}

struct ModelArgs {
  std::string model;
  std::uint64_t input_seed = 0;
  std::string inputs_csv;

  void Register(CLI::App* app) {
    app->add_option("--model", model, "model file or builder name")->required();
    app->add_option("--input-seed", input_seed, "seed for generated heat_transfer inputs");
    app->add_option("--inputs", inputs_csv, "inputs CSV for heat_transfer");
  }

  ModelSpec Load(std::optional<int> N, Manifest& manifest) const {
    manifest.config()["model"] = model;
    if (!IsBuilder(model)) manifest.inputs()["model"] = fs::absolute(model).string();
    std::optional<std::string> inputs;
    if (!inputs_csv.empty()) {
      inputs = inputs_csv;
      manifest.inputs()["inputs"] = fs::absolute(inputs_csv).string();
    } else if (model == "heat_transfer") {
      manifest.seeds()["input_seed"] = input_seed;
    }
    return io::LoadModel(model, N, input_seed, inputs);
  }
};

Vector CheckedVector(const std::string& text, int n, const char* what) {
  const Vector v = io::ParseCsvVector(text);
  if (v.size() != n) {
    throw UsageError(std::string(what) + " needs " + std::to_string(n) + " values, got " +
                     std::to_string(v.size()));
  }
  return v;
}

// Named experiments know their starting point; other models start from ones
// projected into the box.
Vector DefaultAlpha0(const std::string& model, const ModelSpec& spec) {
  if (model == "random_walk" || model == "heat_transfer") return NamedExperiment(model).alpha0;
  Vector a = Vector::Ones(spec.n_alpha);
  if (spec.constraints.lower) a = a.cwiseMax(*spec.constraints.lower);
  if (spec.constraints.upper) a = a.cwiseMin(*spec.constraints.upper);
  return a;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

MeasurementSeries LoadData(const std::string& path, Manifest& manifest) {
  manifest.inputs()["data"] = fs::absolute(path).string();
  MeasurementSeries data = io::ReadSeriesCsv(path);
  if (data.y.empty()) throw UsageError("data file has no rows");
  return data;
}

// --- subcommands -----------------------------------------------------------

struct SimulateCmd {
  ModelArgs model;
  std::string alpha;
  std::optional<std::uint64_t> alpha_seed;
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    auto* a = app->add_option("--alpha", alpha, "true parameters, comma separated");
    auto* s = app->add_option("--alpha-seed", alpha_seed, "draw true parameters from this seed");
    a->excludes(s);
    app->add_option("--n", n, "horizon N")->required()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "noise seed")->required();
    app->add_option("--out", out, "output CSV")->required();
  }

  int Run() {
    Manifest manifest("simulate");
    const ModelSpec spec = model.Load(n, manifest);
    Vector truth;
    if (!alpha.empty()) {
      truth = CheckedVector(alpha, spec.n_alpha, "--alpha");
    } else if (alpha_seed) {
      Vector lo, hi;
      if (model.model == "random_walk" || model.model == "heat_transfer") {
        const ExperimentDefinition def = NamedExperiment(model.model);
        lo = def.true_lower;
        hi = def.true_upper;
      } else if (spec.constraints.lower && spec.constraints.upper &&
                 spec.constraints.lower->allFinite() && spec.constraints.upper->allFinite()) {
        lo = *spec.constraints.lower;
        hi = *spec.constraints.upper;
      } else {
        throw UsageError("--alpha-seed needs a finite parameter box; pass --alpha instead");
      }
      truth = SampleTrueParams(*alpha_seed, lo, hi);
      manifest.seeds()["alpha_seed"] = *alpha_seed;
    } else {
      throw UsageError("one of --alpha or --alpha-seed is required");
    }
    const ValidationReport check = ValidateParameters(spec, truth, 1e-9);
    if (!check.ok()) throw UsageError("true parameters are infeasible: " + check.Describe());

    const MeasurementSeries data = SampleTrajectory(spec, truth, seed);
    io::WriteSeriesCsv(out, data);
    manifest.config()["n"] = n;
    manifest.config()["alpha"] = io::VectorToJson(truth);
    manifest.seeds()["seed"] = seed;
    manifest.WriteSidecar(out);
    return kOk;
  }
};

struct EstimateCmd {
  ModelArgs model;
  std::string data;
  std::string method = "ml";
  std::string alpha0;
  int max_iter = 30;
  bool grid = false;
  bool fixed = false;
  bool fd_check = false;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    app->add_option("--data", data, "measurement CSV")->required();
    app->add_option("--method", method, "ml or aml")->check(CLI::IsMember({"ml", "aml"}));
    app->add_option("--alpha0", alpha0, "starting point, comma separated");
    app->add_option("--max-iter", max_iter, "SQP iterations")->check(CLI::PositiveNumber);
    app->add_flag("--grid", grid, "grid plus golden-section search (one parameter)");
    app->add_flag("--fixed-iterations", fixed, "run exactly --max-iter iterations");
    app->add_flag("--fd-check", fd_check, "log finite-difference gradient errors");
    app->add_option("--out", out, "result JSON")->required();
  }

  int Run() {
    Manifest manifest("estimate");
    const MeasurementSeries series = LoadData(data, manifest);
    const ModelSpec spec = model.Load(series.horizon(), manifest);
    const Vector a0 =
        alpha0.empty() ? DefaultAlpha0(model.model, spec) : CheckedVector(alpha0, spec.n_alpha, "--alpha0");

    SolverConfig cfg;
    cfg.kind = ParseObjectiveKind(method);
    cfg.max_iter = max_iter;
    cfg.grid_search = grid;
    cfg.fixed_iterations = fixed;
    cfg.fd_check = fd_check;
    if (grid && spec.n_alpha != 1) throw UsageError("--grid needs a one-parameter model");

    const EstimationResult result = Estimate(spec, series, cfg, a0);
    manifest.config() = {{"model", model.model}, {"method", method},
                         {"alpha0", io::VectorToJson(a0)}, {"max_iter", max_iter},
                         {"grid", grid}, {"fixed_iterations", fixed}};
    json j = io::ResultToJson(result, spec);
    j["manifest"] = manifest.ToJson();
    io::WriteFile(out, j.dump(2) + "\n");
    if (result.failed()) {
      std::cerr << json{{"error", {{"code", kNumerical},
                                   {"status", std::string(StatusName(result.status))},
                                   {"message", result.message}}}}
                       .dump()
                << "\n";
      return kNumerical;
    }
    return kOk;
  }
};

struct BenchmarkCmd {
  std::string example;
  std::string ns;
  int m = 0;
  std::uint64_t seed = 0;
  std::string methods = "ml,aml";
  int workers = 0;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--example", example, "random_walk or heat_transfer")
        ->required()
        ->check(CLI::IsMember({"random_walk", "heat_transfer"}));
    app->add_option("--ns", ns, "horizons, comma separated")->required();
    app->add_option("--m", m, "trials per horizon (default 200, heat_transfer 10)");
    app->add_option("--seed", seed, "base seed")->required();
    app->add_option("--methods", methods, "ml,aml");
    app->add_option("--workers", workers, "worker threads (default LINGAUSS_WORKERS or all cores)");
    app->add_option("--out", out, "report JSON; the MSE table goes to <out>.csv")->required();
  }

  int Run() {
    Manifest manifest("benchmark");
    if (m <= 0) m = example == "heat_transfer" ? 10 : 200;
    std::vector<int> horizons;
    for (double v : io::ParseCsvVector(ns)) {
      if (v < 1 || v != static_cast<int>(v)) throw UsageError("--ns must list positive integers");
      horizons.push_back(static_cast<int>(v));
    }
    std::vector<ObjectiveKind> kinds;
    for (const auto& name : SplitList(methods)) kinds.push_back(ParseObjectiveKind(name));
    const int resolved = ResolveWorkers(workers);

    const ExperimentReport report =
        RunMseExperiment(NamedExperiment(example), horizons, m, kinds, seed, resolved);
    manifest.config() = {{"example", example}, {"ns", horizons}, {"m", m},
                         {"methods", SplitList(methods)}, {"workers", resolved}};
    manifest.seeds()["seed"] = seed;
    json j = io::ReportToJson(report);
    j["manifest"] = manifest.ToJson();
    io::WriteFile(out, j.dump(2) + "\n");
    io::WriteFile(out + ".csv", io::MseTableToCsv(report));
    manifest.WriteSidecar(out + ".csv");
    return kOk;
  }
};

struct LandscapeCmd {
  ModelArgs model;
  std::string data;
  int param = 1;
  std::string range = "0:5:0.01";
  std::string methods = "ml,aml,to";
  std::string base;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    app->add_option("--data", data, "measurement CSV")->required();
    app->add_option("--param", param, "scanned parameter (1-based)")->check(CLI::PositiveNumber);
    app->add_option("--range", range, "lo:hi:step");
    app->add_option("--methods", methods, "subset of ml,aml,to");
    app->add_option("--base", base, "values of the other parameters");
    app->add_option("--out", out, "output CSV")->required();
  }

  int Run() {
    Manifest manifest("landscape");
    const MeasurementSeries series = LoadData(data, manifest);
    const ModelSpec spec = model.Load(series.horizon(), manifest);
    if (param > spec.n_alpha) throw UsageError("--param exceeds the number of parameters");
    const Vector b =
        base.empty() ? DefaultAlpha0(model.model, spec) : CheckedVector(base, spec.n_alpha, "--base");
    std::vector<LandscapeMethod> ms;
    for (const auto& name : SplitList(methods)) ms.push_back(ParseLandscapeMethod(name));
    const std::vector<double> grid = io::ParseRange(range);

    const LandscapeTable table = LandscapeScan(spec, series, param - 1, b, grid, ms);
    io::WriteFile(out, io::LandscapeToCsv(table));
    manifest.config() = {{"model", model.model}, {"param", param}, {"range", range},
                         {"methods", SplitList(methods)}, {"base", io::VectorToJson(b)}};
    manifest.WriteSidecar(out);
    return kOk;
  }
};

struct ExpectationCmd {
  ModelArgs model;
  std::string alpha;
  int param = 1;
  std::string range = "0:2:0.1";
  int n = 200;
  int m = 200;
  std::uint64_t seed = 0;
  std::string methods = "ml,aml";
  int workers = 0;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    app->add_option("--alpha", alpha, "true parameters")->required();
    app->add_option("--param", param, "scanned parameter (1-based)")->check(CLI::PositiveNumber);
    app->add_option("--range", range, "lo:hi:step");
    app->add_option("--n", n, "horizon N")->check(CLI::PositiveNumber);
    app->add_option("--m", m, "datasets")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "base seed")->required();
    app->add_option("--methods", methods, "ml,aml");
    app->add_option("--workers", workers, "worker threads");
    app->add_option("--out", out, "output JSON")->required();
  }

  int Run() {
    Manifest manifest("expectation");
    const ModelSpec spec = model.Load(n, manifest);
    if (param > spec.n_alpha) throw UsageError("--param exceeds the number of parameters");
    const Vector truth = CheckedVector(alpha, spec.n_alpha, "--alpha");
    std::vector<ObjectiveKind> kinds;
    for (const auto& name : SplitList(methods)) kinds.push_back(ParseObjectiveKind(name));
    const int resolved = ResolveWorkers(workers);
    const ExpectationCheck check = ExpectedObjectiveCheck(
        spec, truth, param - 1, io::ParseRange(range), m, seed, kinds, resolved);
    manifest.config() = {{"model", model.model}, {"alpha", io::VectorToJson(truth)},
                         {"param", param}, {"range", range}, {"n", n}, {"m", m},
                         {"methods", SplitList(methods)}, {"workers", resolved}};
    manifest.seeds()["seed"] = seed;
    json j = io::ExpectationToJson(check);
    j["manifest"] = manifest.ToJson();
    io::WriteFile(out, j.dump(2) + "\n");
    return kOk;
  }
};

struct CheckDerivativesCmd {
  ModelArgs model;
  std::string alpha;
  int n = 0;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    app->add_option("--alpha", alpha, "evaluation point")->required();
    app->add_option("--n", n, "horizon N")->required()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "seed for the simulated data")->required();
    app->add_option("--tol", tol, "relative error bound");
    app->add_option("--out", out, "report JSON (default stdout)");
  }

  int Run() {
    Manifest manifest("check-derivatives");
    const ModelSpec spec = model.Load(n, manifest);
    const Vector a = CheckedVector(alpha, spec.n_alpha, "--alpha");
    const MeasurementSeries data = SampleTrajectory(spec, a, seed);
    const DerivativeCheck check = CheckDerivatives(spec, a, data);

    json items = json::array();
    for (const auto& item : check.items) {
      json row = {{"name", item.name}, {"rel_error", item.rel_error}};
      if (item.param >= 0) row["param"] = item.param + 1;
      items.push_back(row);
    }
    manifest.config() = {{"model", model.model}, {"alpha", io::VectorToJson(a)},
                         {"n", n}, {"tol", tol}};
    manifest.seeds()["seed"] = seed;
    const json j = {{"max_rel_error", check.max_rel_error},
                    {"passed", check.passed(tol)},
                    {"items", items},
                    {"manifest", manifest.ToJson()}};
    if (out.empty()) {
      std::cout << j.dump(2) << "\n";
    } else {
      io::WriteFile(out, j.dump(2) + "\n");
    }
    return check.passed(tol) ? kOk : kCheckFailed;
  }
};

struct FilterCmd {
  ModelArgs model;
  std::string data;
  std::string alpha;
  bool sensitivities = false;
  std::string out;

  void Register(CLI::App* app) {
    model.Register(app);
    app->add_option("--data", data, "measurement CSV")->required();
    app->add_option("--alpha", alpha, "parameters")->required();
    app->add_flag("--sensitivities", sensitivities, "include parameter derivatives");
    app->add_option("--out", out, "trace JSON")->required();
  }

  int Run() {
    Manifest manifest("filter");
    const MeasurementSeries series = LoadData(data, manifest);
    const ModelSpec spec = model.Load(series.horizon(), manifest);
    const Vector a = CheckedVector(alpha, spec.n_alpha, "--alpha");
    const FilterTrace trace = sensitivities ? RunFilterWithSensitivities(spec, a, series)
                                            : RunFilter(spec, a, series);
    const FilterCost cost = RunFilterCost(spec, a, series);
    manifest.config() = {{"model", model.model}, {"alpha", io::VectorToJson(a)},
                         {"sensitivities", sensitivities}};
    json j = io::TraceToJson(trace);
    j["objective"] = {{"ml", cost.ml}, {"aml", cost.aml}};
    j["manifest"] = manifest.ToJson();
    io::WriteFile(out, j.dump(2) + "\n");
    return kOk;
  }
};

int ReportError(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump()
            << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter estimation for linear-Gaussian state-space models"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateCmd simulate;
  EstimateCmd estimate;
  BenchmarkCmd benchmark;
  LandscapeCmd landscape;
  ExpectationCmd expectation;
  CheckDerivativesCmd check;
  FilterCmd filter;
  std::vector<std::pair<CLI::App*, std::function<int()>>> commands;
  auto add = [&](auto& cmd, const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.Register(sub);
    commands.emplace_back(sub, [&cmd] { return cmd.Run(); });
  };
  add(simulate, "simulate", "simulate a measurement series");
  add(estimate, "estimate", "estimate parameters with the ML or A-ML objective");
  add(benchmark, "benchmark", "Monte-Carlo MSE against horizon");
  add(landscape, "landscape", "objective profiles along one parameter");
  add(expectation, "expectation", "objective averaged over simulated datasets");
  add(check, "check-derivatives", "finite-difference check of sensitivities and gradients");
  add(filter, "filter", "dump a Kalman filter trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError(kBadArgs, "usage", e.what());
  }

  try {
    for (auto& [sub, run] : commands) {
      if (sub->parsed()) return run();
    }
    return ReportError(kBadArgs, "usage", "no subcommand");
  } catch (const UsageError& e) {
    return ReportError(kBadArgs, "usage", e.what());
  } catch (const NumericalError& e) {
    return ReportError(kNumerical, "numerical", e.what());
  } catch (const QPError& e) {
    return ReportError(kNumerical, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return ReportError(kBadArgs, "invalid_argument", e.what());
  } catch (const json::exception& e) {
    return ReportError(kBadArgs, "model_file", e.what());
  } catch (const std::exception& e) {
    return ReportError(kNumerical, "runtime", e.what());
  }
}
