// Monte-Carlo experiment harness: MSE against horizon, convergence-rate fits,
// objective landscapes and the expected-objective check.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lingauss/solver.hpp"

namespace lingauss {

using Estimator = std::function<EstimationResult(const ModelSpec&, const MeasurementSeries&,
                                                 const SolverConfig&, const Vector&)>;

struct ExperimentDefinition {
  std::string name;
  /// Model for horizon N; `trial_seed` drives any random inputs.
  std::function<ModelSpec(int N, std::uint64_t trial_seed)> build;
  /// α* ~ U(true_lower, true_upper) componentwise.
  Vector true_lower;
  Vector true_upper;
  Vector alpha0;
  SolverConfig solver;  // `kind` is overridden per method
  Estimator estimator = Estimate;
  /// Optional parameter groups for split MSEs, e.g. {"model": {0,1,2}}.
  std::vector<std::pair<std::string, std::vector<int>>> groups;
};

/// Random walk with unknown gain: α* ~ U(0, 2), grid line search over [0, 5].
ExperimentDefinition RandomWalkExperiment();
/// Heat transfer: α* ~ U(0, 1)⁵, α⁰ = 0.5·1, exactly 30 SQP iterations,
/// split into model (a, b, c) and noise (s_Q, s_ext) groups.
ExperimentDefinition HeatTransferExperiment();
ExperimentDefinition NamedExperiment(const std::string& name);

struct TrialRecord {
  int N = 0;
  int trial = 0;
  ObjectiveKind method = ObjectiveKind::kML;
  std::uint64_t seed = 0;
  Vector alpha_true;
  Vector alpha_hat;
  EstimationStatus status = EstimationStatus::kMaxIter;
  double objective = 0.0;
  double objective_initial = 0.0;
  bool feasible = true;
};

struct MseRow {
  int N = 0;
  ObjectiveKind method = ObjectiveKind::kML;
  int trials = 0;
  int failures = 0;
  /// Mean over successful trials of ‖α̂ − α*‖².
  double mse = 0.0;
  /// Same, counting failed trials with whatever α̂ they returned.
  double mse_including_failures = 0.0;
  std::vector<double> group_mse;  // aligned with ExperimentReport::group_names
};

struct RateFit {
  double slope = 0.0;
  double constant = 0.0;  // exp(intercept)
};

struct ExperimentReport {
  std::string name;
  std::uint64_t base_seed = 0;
  int m = 0;
  std::vector<int> Ns;
  std::vector<ObjectiveKind> methods;
  std::vector<std::string> group_names;
  std::vector<MseRow> rows;
  std::vector<TrialRecord> trials;
  std::map<ObjectiveKind, RateFit> rate_fits;  // when ≥ 3 horizons

  const MseRow& Row(int N, ObjectiveKind method) const;
};

/// Number of worker threads: `requested` if positive, else LINGAUSS_WORKERS,
/// else the hardware concurrency.
int ResolveWorkers(int requested);

/// Runs `tasks` jobs on `workers` threads; job i writes only its own slot.
void ParallelFor(int tasks, int workers, const std::function<void(int)>& job);

/// For each trial i, α* and the data derive from base_seed + i, so the same
/// α* and a prefix-consistent series are used for every horizon. Throws when
/// every trial fails.
ExperimentReport RunMseExperiment(const ExperimentDefinition& def, const std::vector<int>& Ns,
                                  int m, const std::vector<ObjectiveKind>& methods,
                                  std::uint64_t base_seed, int workers = 0);

/// Least-squares line through (log N, log MSE).
RateFit FitConvergenceRate(const std::vector<int>& Ns, const std::vector<double>& mse);

enum class LandscapeMethod { kML, kAML, kTO };
std::string_view LandscapeMethodName(LandscapeMethod method);
LandscapeMethod ParseLandscapeMethod(std::string_view name);

struct LandscapeColumn {
  LandscapeMethod method = LandscapeMethod::kML;
  std::vector<double> raw;         // NaN where the evaluation failed
  std::vector<double> normalized;  // affinely mapped to [0, 1]; raw when degenerate
  bool degenerate = false;
};

struct LandscapeTable {
  int param = 0;
  std::vector<double> grid;
  std::vector<LandscapeColumn> columns;
};

/// Maps finite values affinely onto [0, 1]. Sets `degenerate` and returns the
/// input when all finite values are equal.
std::vector<double> NormalizeUnit(const std::vector<double>& values, bool* degenerate);

/// Objective profiles along α_param with the other components at `base`.
/// TO uses `to_weights` when given, else Q and R at `base` (k = 0) and a flat
/// prior on x_0 unless P_0 is PD.
LandscapeTable LandscapeScan(const ModelSpec& spec, const MeasurementSeries& data, int param,
                             const Vector& base, const std::vector<double>& grid,
                             const std::vector<LandscapeMethod>& methods,
                             const std::optional<TOWeights>& to_weights = std::nullopt);

struct ExpectationCheck {
  std::vector<double> grid;
  std::vector<ObjectiveKind> methods;
  std::vector<std::vector<double>> mean_objective;  // [method][grid point]
  std::vector<double> argmin;                       // per method
  int m = 0;
};

/// Averages φ(α, 𝒴_N) over m datasets simulated at α* (seeds base_seed + i)
/// along α_param and reports the grid argmin per method.
ExpectationCheck ExpectedObjectiveCheck(const ModelSpec& spec, const Vector& alpha_star,
                                        int param, const std::vector<double>& grid, int m,
                                        std::uint64_t base_seed,
                                        const std::vector<ObjectiveKind>& methods,
                                        int workers = 0);

}  // namespace lingauss
