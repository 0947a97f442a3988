// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Details for each criterion are printed indented beneath it.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lingauss/bench.hpp"
#include "lingauss/diagnostics.hpp"
#include "lingauss/examples.hpp"
#include "lingauss/io.hpp"
#include "lingauss/simulate.hpp"
#include "lingauss/solver.hpp"
#include "test_support.hpp"

namespace lingauss {
namespace {

constexpr std::uint64_t kRandomWalkSeed = 2024;
constexpr std::uint64_t kHeatSeed = 2024;

struct Outcome {
  bool passed = false;
  std::vector<std::string> details;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// Central difference on f(t) at t = 0.
double Derivative1D(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

double Rel(double analytic, double reference, double floor) {
  return std::abs(analytic - reference) / std::max(std::abs(reference), floor);
}

Outcome OracleEquivalence() {
  Outcome out;
  std::mt19937_64 rng(101);
  double worst_lib = 0.0, worst_indep = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const ModelSpec spec = testing::RandomSpec(rng);
    const Vector a = testing::RandomAlpha(rng, spec.n_alpha);
    const MeasurementSeries y = testing::RandomSeries(rng, spec.N, spec.n_y);
    const double ml = ObjectiveValue(spec, a, y, ObjectiveKind::kML);
    const double offset = (spec.N + 1) * spec.n_y * std::log(2.0 * M_PI);
    const double lib = -2.0 * StackedLogLikelihood(spec, a, y) - offset;
    const double indep = -2.0 * testing::JointGaussianLogDensity(spec, a, y) - offset;
    worst_lib = std::max(worst_lib, Rel(ml, lib, 1e-300));
    worst_indep = std::max(worst_indep, Rel(ml, indep, 1e-300));
  }
  out.details.push_back(Fmt("library oracle: max rel err %.2e", worst_lib));
  out.details.push_back(Fmt("independent oracle: max rel err %.2e", worst_indep));
  out.passed = worst_lib <= 1e-8 && worst_indep <= 1e-8;
  return out;
}

struct ExampleCase {
  std::string name;
  ModelSpec spec;
  Vector truth;
  std::function<Vector(std::mt19937_64&)> draw;
};

std::vector<ExampleCase> ExampleCases(int N) {
  std::vector<ExampleCase> cases;
  auto uniform = [](double lo, double hi) {
    return [lo, hi](std::mt19937_64& rng, int n) {
      std::uniform_real_distribution<double> u(lo, hi);
      Vector a(n);
      for (int i = 0; i < n; ++i) a[i] = u(rng);
      return a;
    };
  };
  cases.push_back({"random_walk", BuildRandomWalk(N), Vector::Ones(1),
                   [u = uniform(0.05, 2.0)](std::mt19937_64& r) { return u(r, 1); }});
  cases.push_back({"underdetermined", BuildUnderdetermined(N), Vector::Ones(2),
                   [u = uniform(0.2, 2.0)](std::mt19937_64& r) { return u(r, 2); }});
  cases.push_back({"heat_transfer", BuildNamedModel("heat_transfer", N, 5),
                   Vector::Constant(5, 0.5),
                   [u = uniform(0.05, 0.95)](std::mt19937_64& r) { return u(r, 5); }});
  return cases;
}

Outcome DerivativeSuite() {
  Outcome out;
  const MlQuadraticModel hand(Vector::Ones(1), Matrix::Constant(1, 1, 2.0));
  const Vector de1 = Vector::Ones(1);
  const Matrix dS1 = Matrix::Ones(1, 1);
  const double f1 = hand.FirstDerivative(de1, dS1), f2 = hand.SecondDerivative(de1, dS1);
  const bool hand_ok = std::abs(f1 - 0.75) <= 1e-15 && std::abs(f2 - 0.25) <= 1e-15;
  out.details.push_back(Fmt("hand case e=[1], S=[2]: f'=%.17g f''=%.17g", f1, f2));

  constexpr double kStep = 1e-5;
  std::mt19937_64 rng(202);
  double worst_forms = 0.0, worst_grad = 0.0;
  for (const ExampleCase& c : ExampleCases(150)) {
    const MeasurementSeries y = SampleTrajectory(c.spec, c.truth, 31);
    double case_forms = 0.0, case_grad = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const Vector a = c.draw(rng);
      const Vector dir = testing::RandomMatrix(rng, c.spec.n_alpha, 1);

      // Quadratic-model derivatives in (e, S) space along the filter's own
      // sensitivity direction, at a handful of steps.
      const FilterTrace t = RunFilterWithSensitivities(c.spec, a, y);
      for (int k = 0; k <= c.spec.N; k += 37) {
        const Vector& e = t.steps[k].e;
        const Matrix& S = t.steps[k].S;
        Vector de = Vector::Zero(e.size());
        Matrix dS = Matrix::Zero(S.rows(), S.cols());
        for (int i = 0; i < c.spec.n_alpha; ++i) {
          de += dir[i] * t.sensitivities[k].de[i];
          dS += dir[i] * t.sensitivities[k].dS[i];
        }
        auto at = [&](double s) { return MlQuadraticModel(e + s * de, S + s * dS); };
        const MlQuadraticModel m0 = at(0.0);
        const double fd1 = Derivative1D([&](double s) { return at(s).value(); }, kStep);
        const double fd2 =
            Derivative1D([&](double s) { return at(s).FirstDerivative(de, dS); }, kStep);
        const double floor = 1e-8 * (1.0 + m0.value());
        case_forms = std::max(case_forms, Rel(m0.FirstDerivative(de, dS), fd1, floor));
        case_forms = std::max(case_forms, Rel(m0.SecondDerivative(de, dS), fd2, floor));
      }

      const DerivativeCheck check = CheckDerivatives(c.spec, a, y, kStep);
      for (const auto& item : check.items) {
        if (item.name.find("gradient_") != std::string::npos) {
          case_grad = std::max(case_grad, item.rel_error);
        }
      }
    }
    out.details.push_back(Fmt("%s: quadratic-model forms %.2e, objective gradients %.2e",
                              c.name.c_str(), case_forms, case_grad));
    worst_forms = std::max(worst_forms, case_forms);
    worst_grad = std::max(worst_grad, case_grad);
  }
  out.passed = hand_ok && worst_forms <= 1e-6 && worst_grad <= 1e-6;
  return out;
}

Outcome RiccatiFixedPoint() {
  Outcome out;
  const ModelSpec spec = BuildRandomWalk(200);
  MeasurementSeries y;
  for (int k = 0; k <= 200; ++k) y.y.push_back(Vector::Zero(1));
  const FilterTrace t = RunFilter(spec, Vector::Ones(1), y);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  int first = -1;
  for (int k = 0; k <= 200; ++k) {
    if (std::abs(t.states[k].P(0, 0) - golden) <= 1e-10) {
      first = k;
      break;
    }
  }
  const double final_err = std::abs(t.states[200].P(0, 0) - golden);
  out.details.push_back(Fmt("within 1e-10 from step %d; |P_200 - golden| = %.2e", first, final_err));
  out.passed = first >= 0 && first <= 200 && final_err <= 1e-10;
  return out;
}

Outcome RandomWalkExperimentCheck() {
  Outcome out;
  const std::vector<int> Ns = {50, 100, 200, 500, 1000, 2000};
  const std::vector<ObjectiveKind> methods = {ObjectiveKind::kML, ObjectiveKind::kAML};
  const ExperimentReport r =
      RunMseExperiment(RandomWalkExperiment(), Ns, 200, methods, kRandomWalkSeed);
  bool ok = true;
  for (ObjectiveKind kind : methods) {
    std::ostringstream row;
    row << ObjectiveName(kind) << " MSE:";
    int failures = 0;
    for (int N : Ns) {
      row << " " << N << "=" << Fmt("%.3e", r.Row(N, kind).mse);
      failures += r.Row(N, kind).failures;
    }
    out.details.push_back(row.str());
    const bool decreasing = r.Row(1000, kind).mse < r.Row(50, kind).mse;
    const auto fit = r.rate_fits.find(kind);
    const bool has_fit = fit != r.rate_fits.end();
    const double slope = has_fit ? fit->second.slope : std::nan("");
    const bool slope_ok = has_fit && slope >= -1.3 && slope <= -0.7;
    out.details.push_back(Fmt("%s: MSE(1000) < MSE(50): %s; slope %.3f (C = %.3g); failed trials %d",
                              std::string(ObjectiveName(kind)).c_str(), decreasing ? "yes" : "no",
                              slope, has_fit ? fit->second.constant : std::nan(""), failures));
    ok = ok && decreasing && slope_ok;
  }
  const double ml = r.Row(1000, ObjectiveKind::kML).mse;
  const double aml = r.Row(1000, ObjectiveKind::kAML).mse;
  out.details.push_back(Fmt("N=1000: ML %.3e <= 1.1 x AML %.3e: %s", ml, aml,
                            ml <= 1.1 * aml ? "yes" : "no"));
  out.passed = ok && ml <= 1.1 * aml;
  return out;
}

Outcome TrajectoryOptimizationFailure() {
  Outcome out;
  const ModelSpec spec = BuildRandomWalk(1000);
  const MeasurementSeries y = SampleTrajectory(spec, Vector::Ones(1), 77);
  const TOWeights unit{Matrix::Ones(1, 1), Matrix::Ones(1, 1), std::nullopt};
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity(), first = 0.0;
  std::ostringstream values;
  values << "TO value:";
  for (double a : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double v = EvalTOInner(spec, Vector::Constant(1, a), y, unit).value;
    if (a == 1.0) first = v;
    monotone = monotone && v <= prev;
    prev = v;
    values << " " << a << "->" << Fmt("%.4g", v);
  }
  out.details.push_back(values.str());
  const bool small = prev < 0.05 * first;
  out.details.push_back(Fmt("ratio at 32: %.4f", prev / first));
  bool bound_ok = true;
  for (double eps : {1.0, 0.5, 0.1}) {
    const double v = EvalTOInner(spec, Vector::Constant(1, 1.0 / eps), y, unit).value;
    const double bound = TOCounterexampleBound(y, eps);
    bound_ok = bound_ok && v <= bound;
    out.details.push_back(Fmt("eps=%.1f: TO %.4g <= bound %.4g", eps, v, bound));
  }
  out.passed = monotone && small && bound_ok;
  return out;
}

Outcome ExpectedObjective() {
  Outcome out;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.1 * i);
  const ExpectationCheck c =
      ExpectedObjectiveCheck(BuildRandomWalk(200), Vector::Ones(1), 0, grid, 200, 4242,
                             {ObjectiveKind::kML, ObjectiveKind::kAML});
  bool ok = true;
  for (size_t j = 0; j < c.methods.size(); ++j) {
    const bool near = std::abs(c.argmin[j] - 1.0) <= 0.1 + 1e-12;
    ok = ok && near;
    out.details.push_back(Fmt("%s: argmin of averaged objective %.1f",
                              std::string(ObjectiveName(c.methods[j])).c_str(), c.argmin[j]));
  }
  out.passed = ok;
  return out;
}

Outcome Underdetermination() {
  Outcome out;
  const ModelSpec spec = BuildUnderdetermined(200);
  const Vector truth = Vector::Ones(2);
  const MeasurementSeries y = SampleTrajectory(spec, truth, 12);
  Vector literal(2), corrected(2);
  literal << 2.0, 4.0;
  corrected << 2.0, 0.25;
  const double base = ObjectiveValue(spec, truth, y, ObjectiveKind::kML);
  const double lit = ObjectiveValue(spec, literal, y, ObjectiveKind::kML);
  const double cor = ObjectiveValue(spec, corrected, y, ObjectiveKind::kML);
  const double lit_err = Rel(lit, base, 1e-300), cor_err = Rel(cor, base, 1e-300);
  out.details.push_back(Fmt("ML(1,1) = %.12g, ML(2,4) = %.12g: rel diff %.3e (required <= 1e-8)",
                            base, lit, lit_err));
  out.details.push_back(Fmt("ML(2,1/4) = %.12g: rel diff %.3e (the invariant is a1^2 a2)", cor,
                            cor_err));

  SolverConfig cfg;
  const EstimationResult r = Estimate(spec, y, cfg, literal);
  const bool solver_ok = !r.failed() && r.hessian_regularized && std::isfinite(r.objective);
  out.details.push_back(Fmt(
      "solver from (2,4): status %s, regularized %s, alpha_hat (%.4f, %.4f), a1^2 a2 = %.4f",
      std::string(StatusName(r.status)).c_str(), r.hessian_regularized ? "yes" : "no",
      r.alpha_hat[0], r.alpha_hat[1], r.alpha_hat[0] * r.alpha_hat[0] * r.alpha_hat[1]));
  out.passed = lit_err <= 1e-8 && solver_ok;
  return out;
}

Outcome HeatExperiment() {
  Outcome out;
  const std::vector<ObjectiveKind> methods = {ObjectiveKind::kML, ObjectiveKind::kAML};
  const ExperimentReport r =
      RunMseExperiment(HeatTransferExperiment(), {500, 2000}, 10, methods, kHeatSeed);
  int bad = 0;
  for (const auto& t : r.trials) {
    const bool ok = t.feasible && std::isfinite(t.objective) &&
                    t.status != EstimationStatus::kQPFailure &&
                    t.status != EstimationStatus::kFilterFailure &&
                    t.objective <= t.objective_initial;
    if (!ok) {
      ++bad;
      out.details.push_back(Fmt("trial %d N=%d %s: status %s, objective %.6g vs initial %.6g",
                                t.trial, t.N, std::string(ObjectiveName(t.method)).c_str(),
                                std::string(StatusName(t.status)).c_str(), t.objective,
                                t.objective_initial));
    }
  }
  out.details.push_back(Fmt("(a) %zu runs, %d infeasible or above the starting objective",
                            r.trials.size(), bad));
  for (ObjectiveKind kind : methods) {
    for (int N : {500, 2000}) {
      const MseRow& row = r.Row(N, kind);
      out.details.push_back(Fmt("%s N=%d: total %.4e, model %.4e, noise %.4e",
                                std::string(ObjectiveName(kind)).c_str(), N, row.mse,
                                row.group_mse[0], row.group_mse[1]));
    }
  }
  const bool total_ok =
      r.Row(2000, ObjectiveKind::kML).mse < r.Row(500, ObjectiveKind::kML).mse;
  const double ml_noise = r.Row(2000, ObjectiveKind::kML).group_mse[1];
  const double aml_noise = r.Row(2000, ObjectiveKind::kAML).group_mse[1];
  out.details.push_back(Fmt("(b) ML total MSE decreases: %s", total_ok ? "yes" : "no"));
  out.details.push_back(Fmt("(c) noise MSE at N=2000: ML %.4e <= AML %.4e: %s", ml_noise,
                            aml_noise, ml_noise <= aml_noise ? "yes" : "no"));
  out.passed = bad == 0 && total_ok && ml_noise <= aml_noise;
  return out;
}

#ifdef LINGAUSS_CLI_PATH
// Report JSON from the CLI with the run manifest (timings, worker count) removed.
std::string CliBenchmark(const std::string& example, const std::string& ns, int m, int workers,
                         const std::filesystem::path& dir) {
  const auto out = dir / (example + "_w" + std::to_string(workers) + ".json");
  const std::string cmd = std::string(LINGAUSS_CLI_PATH) + " benchmark --example " + example +
                          " --ns " + ns + " --m " + std::to_string(m) + " --seed 31 --workers " +
                          std::to_string(workers) + " --out " + out.string();
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return "<exit " + std::to_string(status) + ">";
  io::json j = io::json::parse(io::ReadFile(out));
  j.erase("manifest");
  return j.dump();
}
#endif

Outcome Determinism() {
  Outcome out;
  bool ok = true;
#ifdef LINGAUSS_CLI_PATH
  const auto dir = std::filesystem::temp_directory_path() / "lingauss_acceptance_determinism";
  std::filesystem::create_directories(dir);
  for (const auto& [example, ns, m] :
       {std::tuple{"random_walk", "50,100,200", 20}, std::tuple{"heat_transfer", "150", 3}}) {
    const std::string a = CliBenchmark(example, ns, m, 1, dir);
    const std::string b = CliBenchmark(example, ns, m, 8, dir);
    const bool same = a == b && a.front() == '{';
    ok = ok && same;
    out.details.push_back(Fmt("benchmark %s: workers 1 vs 8 identical: %s (%zu bytes)", example,
                              same ? "yes" : "no", a.size()));
  }
  std::filesystem::remove_all(dir);
#else
  for (int rep = 0; rep < 2; ++rep) {
    const auto a = io::ReportToJson(RunMseExperiment(RandomWalkExperiment(), {50, 100}, 20,
                                                     {ObjectiveKind::kML}, 31, 1));
    const auto b = io::ReportToJson(RunMseExperiment(RandomWalkExperiment(), {50, 100}, 20,
                                                     {ObjectiveKind::kML}, 31, 8));
    ok = ok && a == b;
  }
  out.details.push_back("CLI not built; compared library reports");
#endif
  out.passed = ok;
  return out;
}

struct Criterion {
  int id;
  const char* title;
  double time_limit_s;  // 0 when unbounded
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace lingauss

int main() {
  using namespace lingauss;
  const std::vector<Criterion> criteria = {
      {1, "oracle equivalence on 50 random specs", 10.0, OracleEquivalence},
      {2, "derivative suite", 30.0, DerivativeSuite},
      {3, "Riccati fixed point of the random walk", 0.0, RiccatiFixedPoint},
      {4, "random-walk MSE against horizon", 0.0, RandomWalkExperimentCheck},
      {5, "trajectory optimization drives the gain up", 0.0, TrajectoryOptimizationFailure},
      {6, "expected objective minimized at the truth", 0.0, ExpectedObjective},
      {7, "underdetermined model invariance and regularization", 0.0, Underdetermination},
      {8, "heat-transfer experiment", 0.0, HeatExperiment},
      {9, "benchmark determinism across worker counts", 0.0, Determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0.0 && secs >= c.time_limit_s) {
      o.passed = false;
      o.details.push_back(Fmt("exceeded the %.0f s limit", c.time_limit_s));
    }
    std::cout << (o.passed ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title
              << Fmt(" (%.1f s)", secs) << "\n";
    for (const auto& d : o.details) std::cout << "      " << d << "\n";
    std::cout.flush();
    if (!o.passed) ++failures;
  }
  std::cout << (failures == 0 ? "ALL PASS" : Fmt("%d criteria failed", failures)) << "\n";
  return failures == 0 ? 0 : 1;
}
