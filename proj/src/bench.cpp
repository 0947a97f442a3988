#include "lingauss/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "lingauss/examples.hpp"
#include "lingauss/simulate.hpp"

namespace lingauss {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

ExperimentDefinition RandomWalkExperiment() {
  ExperimentDefinition def;
  def.name = "random_walk";
  def.build = [](int N, std::uint64_t) { return BuildRandomWalk(N); };
  def.true_lower = Vector::Zero(1);
  def.true_upper = Vector::Constant(1, 2.0);
  def.alpha0 = Vector::Constant(1, 0.5);
  def.solver.grid_search = true;
  def.solver.grid_lower = 0.0;
  def.solver.grid_upper = 5.0;
  def.solver.grid_points = 50;
  return def;
}

ExperimentDefinition HeatTransferExperiment() {
  ExperimentDefinition def;
  def.name = "heat_transfer";
  def.build = [](int N, std::uint64_t trial_seed) {
    return BuildHeatTransfer(
        GenPiecewiseInputs(DeriveSeed(trial_seed, 0x1457), N, HeatTransferInputRanges()));
  };
  def.true_lower = Vector::Zero(5);
  def.true_upper = Vector::Ones(5);
  def.alpha0 = Vector::Constant(5, 0.5);
  def.solver.max_iter = 30;
  def.solver.fixed_iterations = true;
  def.groups = {{"model", {0, 1, 2}}, {"noise", {3, 4}}};
  return def;
}

ExperimentDefinition NamedExperiment(const std::string& name) {
  if (name == "random_walk") return RandomWalkExperiment();
  if (name == "heat_transfer") return HeatTransferExperiment();
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

const MseRow& ExperimentReport::Row(int N, ObjectiveKind method) const {
  for (const auto& row : rows) {
    if (row.N == N && row.method == method) return row;
  }
  throw std::out_of_range("no MSE row for the requested horizon and method");
}

int ResolveWorkers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LINGAUSS_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void ParallelFor(int tasks, int workers, const std::function<void(int)>& job) {
  workers = std::max(1, std::min(workers, tasks));
  if (workers == 1) {
    for (int i = 0; i < tasks; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < tasks && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ExperimentReport RunMseExperiment(const ExperimentDefinition& def, const std::vector<int>& Ns,
                                  int m, const std::vector<ObjectiveKind>& methods,
                                  std::uint64_t base_seed, int workers) {
  if (m < 1) throw std::invalid_argument("need at least one trial");
  if (Ns.empty() || methods.empty()) throw std::invalid_argument("need horizons and methods");

  ExperimentReport report;
  report.name = def.name;
  report.base_seed = base_seed;
  report.m = m;
  report.Ns = Ns;
  report.methods = methods;
  for (const auto& g : def.groups) report.group_names.push_back(g.first);

  const int n_methods = static_cast<int>(methods.size());
  const int units = static_cast<int>(Ns.size()) * m;
  report.trials.resize(static_cast<size_t>(units) * n_methods);

  ParallelFor(units, ResolveWorkers(workers), [&](int unit) {
    const int n_index = unit / m;
    const int trial = unit % m;
    const int N = Ns[n_index];
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(trial);
    const Vector alpha_true = SampleTrueParams(seed, def.true_lower, def.true_upper);
    const ModelSpec spec = def.build(N, seed);
    const MeasurementSeries data = SampleTrajectory(spec, alpha_true, seed);
    for (int j = 0; j < n_methods; ++j) {
      TrialRecord& rec = report.trials[static_cast<size_t>(unit) * n_methods + j];
      rec.N = N;
      rec.trial = trial;
      rec.method = methods[j];
      rec.seed = seed;
      rec.alpha_true = alpha_true;
      SolverConfig cfg = def.solver;
      cfg.kind = methods[j];
      try {
        rec.objective_initial = ObjectiveValue(spec, def.alpha0, data, cfg.kind);
      } catch (const NumericalError&) {
        rec.objective_initial = kNaN;
      }
      try {
        const EstimationResult est = def.estimator(spec, data, cfg, def.alpha0);
        rec.alpha_hat = est.alpha_hat;
        rec.status = est.status;
        rec.objective = est.objective;
      } catch (const std::exception&) {
        rec.alpha_hat = def.alpha0;
        rec.status = EstimationStatus::kFilterFailure;
        rec.objective = kNaN;
      }
      rec.feasible = ConstraintViolation(spec.constraints, rec.alpha_hat) <= 1e-8;
    }
  });

  bool any_success = false;
  for (int N : Ns) {
    for (ObjectiveKind method : methods) {
      MseRow row;
      row.N = N;
      row.method = method;
      row.group_mse.assign(def.groups.size(), 0.0);
      double sum_all = 0.0;
      int ok = 0;
      for (const auto& rec : report.trials) {
        if (rec.N != N || rec.method != method) continue;
        ++row.trials;
        const Vector err = rec.alpha_hat - rec.alpha_true;
        sum_all += err.squaredNorm();
        if (rec.status == EstimationStatus::kQPFailure ||
            rec.status == EstimationStatus::kFilterFailure) {
          ++row.failures;
          continue;
        }
        ++ok;
        row.mse += err.squaredNorm();
        for (size_t g = 0; g < def.groups.size(); ++g) {
          for (int idx : def.groups[g].second) row.group_mse[g] += err[idx] * err[idx];
        }
      }
      if (ok > 0) {
        any_success = true;
        row.mse /= ok;
        for (double& v : row.group_mse) v /= ok;
      } else {
        row.mse = kNaN;
        for (double& v : row.group_mse) v = kNaN;
      }
      row.mse_including_failures = sum_all / row.trials;
      report.rows.push_back(row);
    }
  }
  if (!any_success) throw std::runtime_error("every estimation trial failed");

  if (Ns.size() >= 3) {
    for (ObjectiveKind method : methods) {
      std::vector<double> mse;
      for (int N : Ns) mse.push_back(report.Row(N, method).mse);
      try {
        report.rate_fits[method] = FitConvergenceRate(Ns, mse);
      } catch (const std::invalid_argument&) {
      }
    }
  }
  return report;
}

RateFit FitConvergenceRate(const std::vector<int>& Ns, const std::vector<double>& mse) {
  if (Ns.size() != mse.size()) throw std::invalid_argument("horizon and MSE lists differ");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < Ns.size(); ++i) {
    if (Ns[i] > 0 && mse[i] > 0.0 && std::isfinite(mse[i])) {
      xs.push_back(std::log(static_cast<double>(Ns[i])));
      ys.push_back(std::log(mse[i]));
    }
  }
  if (xs.size() < 3) throw std::invalid_argument("rate fit needs at least 3 positive points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate fit needs distinct horizons");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.constant = std::exp(my - fit.slope * mx);
  return fit;
}

std::string_view LandscapeMethodName(LandscapeMethod method) {
  switch (method) {
    case LandscapeMethod::kML: return "ml";
    case LandscapeMethod::kAML: return "aml";
    case LandscapeMethod::kTO: return "to";
  }
  return "?";
}

LandscapeMethod ParseLandscapeMethod(std::string_view name) {
  if (name == "ml" || name == "ML") return LandscapeMethod::kML;
  if (name == "aml" || name == "AML") return LandscapeMethod::kAML;
  if (name == "to" || name == "TO") return LandscapeMethod::kTO;
  throw std::invalid_argument("unknown landscape method '" + std::string(name) + "'");
}

std::vector<double> NormalizeUnit(const std::vector<double>& values, bool* degenerate) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const bool flat = !(hi > lo);
  if (degenerate) *degenerate = flat;
  if (flat) return values;
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = std::isfinite(values[i]) ? (values[i] - lo) / (hi - lo) : kNaN;
  }
  return out;
}

LandscapeTable LandscapeScan(const ModelSpec& spec, const MeasurementSeries& data, int param,
                             const Vector& base, const std::vector<double>& grid,
                             const std::vector<LandscapeMethod>& methods,
                             const std::optional<TOWeights>& to_weights) {
  if (param < 0 || param >= spec.n_alpha) throw std::out_of_range("scan parameter out of range");
  if (base.size() != spec.n_alpha) throw std::invalid_argument("base point has wrong length");
  LandscapeTable table;
  table.param = param;
  table.grid = grid;

  TOWeights weights;
  if (to_weights) {
    weights = *to_weights;
  } else {
    weights.Q = EvaluateFamily(spec, Family::kQ, base, 0);
    weights.R = EvaluateFamily(spec, Family::kR, base, 0);
    if (IsPositiveDefinite(spec.x0_cov)) weights.P0 = spec.x0_cov;
  }

  for (LandscapeMethod method : methods) {
    LandscapeColumn col;
    col.method = method;
    col.raw.reserve(grid.size());
    for (double value : grid) {
      Vector alpha = base;
      alpha[param] = value;
      double v = kNaN;
      try {
        switch (method) {
          case LandscapeMethod::kML:
            v = ObjectiveValue(spec, alpha, data, ObjectiveKind::kML);
            break;
          case LandscapeMethod::kAML:
            v = ObjectiveValue(spec, alpha, data, ObjectiveKind::kAML);
            break;
          case LandscapeMethod::kTO:
            v = EvalTOInner(spec, alpha, data, weights).value;
            break;
        }
      } catch (const NumericalError&) {
        v = kNaN;
      }
      col.raw.push_back(v);
    }
    col.normalized = NormalizeUnit(col.raw, &col.degenerate);
    table.columns.push_back(std::move(col));
  }
  return table;
}

ExpectationCheck ExpectedObjectiveCheck(const ModelSpec& spec, const Vector& alpha_star,
                                        int param, const std::vector<double>& grid, int m,
                                        std::uint64_t base_seed,
                                        const std::vector<ObjectiveKind>& methods,
                                        int workers) {
  if (m < 1) throw std::invalid_argument("need at least one dataset");
  if (param < 0 || param >= spec.n_alpha) throw std::out_of_range("parameter out of range");
  if (grid.empty()) throw std::invalid_argument("grid is empty");
  const int n_methods = static_cast<int>(methods.size());
  const int n_grid = static_cast<int>(grid.size());

  // values[i][method][grid]
  std::vector<std::vector<std::vector<double>>> values(
      m, std::vector<std::vector<double>>(n_methods, std::vector<double>(n_grid)));
  ParallelFor(m, ResolveWorkers(workers), [&](int i) {
    const MeasurementSeries data =
        SampleTrajectory(spec, alpha_star, base_seed + static_cast<std::uint64_t>(i));
    for (int g = 0; g < n_grid; ++g) {
      Vector alpha = alpha_star;
      alpha[param] = grid[g];
      const FilterCost cost = RunFilterCost(spec, alpha, data);
      for (int j = 0; j < n_methods; ++j) {
        values[i][j][g] = methods[j] == ObjectiveKind::kML ? cost.ml : cost.aml;
      }
    }
  });

  ExpectationCheck out;
  out.grid = grid;
  out.methods = methods;
  out.m = m;
  out.mean_objective.assign(n_methods, std::vector<double>(n_grid, 0.0));
  for (int j = 0; j < n_methods; ++j) {
    for (int g = 0; g < n_grid; ++g) {
      for (int i = 0; i < m; ++i) out.mean_objective[j][g] += values[i][j][g];
      out.mean_objective[j][g] /= m;
    }
    const auto& row = out.mean_objective[j];
    out.argmin.push_back(grid[std::min_element(row.begin(), row.end()) - row.begin()]);
  }
  return out;
}

}  // namespace lingauss
