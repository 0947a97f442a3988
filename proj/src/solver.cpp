#include "lingauss/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lingauss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double L1Violation(const ConstraintSet& cs, const Vector& alpha) {
  const ConstraintEval h = EvalConstraints(cs, alpha);
  return h.residual.cwiseMax(0.0).sum();
}

}  // namespace

MlQuadraticModel::MlQuadraticModel(Vector e, const Matrix& S) : e_(std::move(e)) {
  Eigen::LLT<Matrix> llt(0.5 * (S + S.transpose()));
  if (llt.info() != Eigen::Success || S.rows() != e_.size()) {
    throw NumericalError("quadratic model needs a PD matrix S matching e");
  }
  M_ = llt.solve(Matrix::Identity(S.rows(), S.cols()));
  Me_ = M_ * e_;
  value_ = e_.dot(Me_);
}

double MlQuadraticModel::FirstDerivative(const Vector& de, const Matrix& dS) const {
  return 2.0 * de.dot(Me_) - Me_.dot(dS * Me_);
}

double MlQuadraticModel::SecondDerivative(const Vector& de, const Matrix& dS) const {
  const Vector z = de - dS * Me_;
  return 2.0 * z.dot(M_ * z);
}

double MlQuadraticModel::Quadratic(const Vector& de, const Matrix& dS) const {
  return value_ + FirstDerivative(de, dS) + 0.5 * SecondDerivative(de, dS);
}

void SolverConfig::Validate() const {
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(line_search.backtrack > 0.0 && line_search.backtrack < 1.0)) {
    throw std::invalid_argument("line-search backtrack factor must lie in (0, 1)");
  }
  if (!(line_search.sufficient_decrease > 0.0 && line_search.sufficient_decrease < 1.0)) {
    throw std::invalid_argument("sufficient-decrease constant must lie in (0, 1)");
  }
  if (line_search.max_backtracks < 0) throw std::invalid_argument("max_backtracks must be >= 0");
  if (!(merit_penalty > 0.0)) throw std::invalid_argument("merit penalty must be positive");
  if (!(stop_tol > 0.0)) throw std::invalid_argument("stop_tol must be positive");
  if (grid_search && grid_points < 2) throw std::invalid_argument("grid needs >= 2 points");
}

std::string_view StatusName(EstimationStatus status) {
  switch (status) {
    case EstimationStatus::kConverged: return "converged";
    case EstimationStatus::kMaxIter: return "max_iter";
    case EstimationStatus::kStalled: return "stalled";
    case EstimationStatus::kQPFailure: return "qp_failure";
    case EstimationStatus::kFilterFailure: return "filter_failure";
  }
  return "unknown";
}

QPSubproblem BuildQP(const Vector& alpha, const FilterTrace& trace, ObjectiveKind kind,
                     const ConstraintSet& constraints) {
  if (!trace.has_sensitivities()) {
    throw std::invalid_argument("BuildQP needs a trace with sensitivities");
  }
  const int na = static_cast<int>(alpha.size());
  QPSubproblem qp;
  qp.H = Matrix::Zero(na, na);
  qp.g = Vector::Zero(na);
  for (size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& rec = trace.steps[k];
    const StepSensitivity& sens = trace.sensitivities[k];
    const int ny = static_cast<int>(rec.e.size());
    Matrix Z(ny, na);
    if (kind == ObjectiveKind::kAML) {
      for (int i = 0; i < na; ++i) Z.col(i) = sens.de[i];
      qp.H.noalias() += 2.0 * Z.transpose() * Z;
      qp.g.noalias() += 2.0 * Z.transpose() * rec.e;
      continue;
    }
    const Vector Me = rec.S_inv * rec.e;
    for (int i = 0; i < na; ++i) {
      Z.col(i) = sens.de[i] - sens.dS[i] * Me;
      qp.g[i] += 2.0 * sens.de[i].dot(Me) - Me.dot(sens.dS[i] * Me) +
                 rec.S_inv.cwiseProduct(sens.dS[i]).sum();
    }
    qp.H.noalias() += 2.0 * Z.transpose() * rec.S_inv * Z;
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();

  const ConstraintEval h = EvalConstraints(constraints, alpha);
  qp.G = h.jacobian;
  qp.h = (-h.residual).cwiseMax(0.0);
  return qp;
}

LineSearchResult LineSearchUpdate(const Vector& alpha, const Vector& delta, double merit0,
                                  double directional_derivative,
                                  const std::function<double(const Vector&)>& merit,
                                  const LineSearchConfig& cfg) {
  LineSearchResult out;
  out.alpha = alpha;
  out.merit = merit0;
  if (!(directional_derivative < 0.0) || !std::isfinite(merit0)) {
    out.stalled = true;
    return out;
  }
  double t = 1.0;
  for (int i = 0; i <= cfg.max_backtracks; ++i, t *= cfg.backtrack) {
    const Vector trial = alpha + t * delta;
    double value = kInf;
    try {
      value = merit(trial);
    } catch (const NumericalError&) {
      value = kInf;
    }
    ++out.evaluations;
    if (std::isfinite(value) &&
        value <= merit0 + cfg.sufficient_decrease * t * directional_derivative) {
      out.alpha = trial;
      out.step = t;
      out.merit = value;
      return out;
    }
  }
  out.stalled = true;
  return out;
}

namespace {

EstimationResult GridEstimate(const ModelSpec& spec, const MeasurementSeries& data,
                              const SolverConfig& cfg) {
  const auto& cs = spec.constraints;
  double lo = cfg.grid_lower;
  double hi = cfg.grid_upper;
  if (cs.lower && std::isfinite((*cs.lower)[0])) lo = std::max(lo, (*cs.lower)[0]);
  if (cs.upper && std::isfinite((*cs.upper)[0])) hi = std::min(hi, (*cs.upper)[0]);
  if (!(hi > lo)) throw std::invalid_argument("grid bracket is empty");

  auto phi = [&](double a) {
    Vector alpha(1);
    alpha[0] = a;
    if (ConstraintViolation(cs, alpha) > 0.0) return kInf;
    try {
      return ObjectiveValue(spec, alpha, data, cfg.kind);
    } catch (const NumericalError&) {
      return kInf;
    }
  };

  const int n = cfg.grid_points;
  std::vector<double> grid(n + 1), values(n + 1);
  int best = 0;
  for (int j = 0; j <= n; ++j) {
    grid[j] = lo + (hi - lo) * j / n;
    values[j] = phi(grid[j]);
    if (values[j] < values[best]) best = j;
  }

  EstimationResult result;
  result.alpha_hat = Vector::Constant(1, grid[best]);
  if (!std::isfinite(values[best])) {
    result.status = EstimationStatus::kFilterFailure;
    result.objective = kInf;
    result.message = "objective undefined on the whole grid";
    return result;
  }

  // Golden-section refinement on the neighbouring cells.
  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, n)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = phi(c);
  double fd = phi(d);
  int evals = 0;
  while (b - a > 1e-10 * (1.0 + std::abs(a) + std::abs(b)) && evals < 200) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = phi(d);
    }
    ++evals;
  }
  const double refined = 0.5 * (a + b);
  const double f_refined = phi(refined);
  if (f_refined <= values[best]) {
    result.alpha_hat[0] = refined;
    result.objective = f_refined;
  } else {
    result.objective = values[best];
  }
  result.status = EstimationStatus::kConverged;
  IterateRecord rec;
  rec.alpha = result.alpha_hat;
  rec.objective = result.objective;
  rec.merit = result.objective;
  rec.step_length = 1.0;
  result.iterates.push_back(rec);
  return result;
}

double FiniteDifferenceGradientError(const ModelSpec& spec, const MeasurementSeries& data,
                                     ObjectiveKind kind, const Vector& alpha,
                                     const Vector& gradient) {
  double worst = 0.0;
  for (int i = 0; i < alpha.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(alpha[i]));
    Vector plus = alpha, minus = alpha;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (ObjectiveValue(spec, plus, data, kind) -
                       ObjectiveValue(spec, minus, data, kind)) /
                      (2.0 * h);
    const double err = std::abs(fd - gradient[i]) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

EstimationResult Estimate(const ModelSpec& spec, const MeasurementSeries& data,
                          const SolverConfig& cfg, const Vector& alpha0) {
  cfg.Validate();
  if (alpha0.size() != spec.n_alpha) {
    throw std::invalid_argument("initial parameter vector has the wrong length");
  }
  const ValidationReport report = ValidateParameters(spec, alpha0, 1e-10);
  if (!report.feasible) {
    throw std::invalid_argument("initial parameters are infeasible: " + report.Describe());
  }
  if (cfg.grid_search && spec.n_alpha == 1) return GridEstimate(spec, data, cfg);

  EstimationResult result;
  result.alpha_hat = alpha0;
  result.objective = kInf;
  if (!report.ok()) {
    result.status = EstimationStatus::kFilterFailure;
    result.message = report.Describe();
    return result;
  }

  const ConstraintSet& cs = spec.constraints;
  double penalty = cfg.merit_penalty;
  auto merit = [&](const Vector& a) {
    return ObjectiveValue(spec, a, data, cfg.kind) + penalty * L1Violation(cs, a);
  };

  Vector alpha = alpha0;
  FilterTrace trace;
  try {
    trace = RunFilterWithSensitivities(spec, alpha, data);
  } catch (const NumericalError& e) {
    result.status = EstimationStatus::kFilterFailure;
    result.message = e.what();
    return result;
  }

  double best_merit = kInf;
  result.status = EstimationStatus::kMaxIter;
  for (int it = 0;; ++it) {
    const ObjectiveEval obj = EvalObjective(trace, cfg.kind, true);
    const double viol = L1Violation(cs, alpha);
    IterateRecord rec;
    rec.alpha = alpha;
    rec.objective = obj.value;
    rec.penalty = penalty;
    rec.merit = obj.value + penalty * viol;
    if (cfg.fd_check) {
      try {
        rec.fd_gradient_error =
            FiniteDifferenceGradientError(spec, data, cfg.kind, alpha, *obj.gradient);
      } catch (const NumericalError&) {
        rec.fd_gradient_error = -1.0;
      }
    }

    if (viol <= 1e-8 && rec.merit < best_merit) {
      best_merit = rec.merit;
      result.alpha_hat = alpha;
      result.objective = obj.value;
    }
    if (it >= cfg.max_iter) {
      result.iterates.push_back(rec);
      break;
    }

    const QPSubproblem qp = BuildQP(alpha, trace, cfg.kind, cs);
    QPSolution sol;
    try {
      sol = SolveDenseQP(qp);
    } catch (const QPError& e) {
      result.iterates.push_back(rec);
      result.status = EstimationStatus::kQPFailure;
      result.message = e.what();
      break;
    }
    result.hessian_regularized |= sol.regularized;

    const double max_multiplier = sol.multipliers.size() ? sol.multipliers.maxCoeff() : 0.0;
    while (penalty < 1.1 * max_multiplier) penalty *= 2.0;
    rec.penalty = penalty;
    rec.merit = obj.value + penalty * viol;

    Vector stationarity = qp.g;
    if (qp.G.rows() > 0) stationarity += qp.G.transpose() * sol.multipliers;
    rec.kkt = stationarity.cwiseAbs().maxCoeff() / (1.0 + std::abs(obj.value));
    rec.step_norm = sol.x.size() ? sol.x.cwiseAbs().maxCoeff() : 0.0;

    if (!cfg.fixed_iterations && std::max(rec.step_norm, rec.kkt) <= cfg.stop_tol) {
      result.iterates.push_back(rec);
      result.status = EstimationStatus::kConverged;
      break;
    }

    const double directional = qp.g.dot(sol.x) - penalty * viol;
    const LineSearchResult ls =
        LineSearchUpdate(alpha, sol.x, rec.merit, directional, merit, cfg.line_search);
    rec.step_length = ls.step;
    result.iterates.push_back(rec);
    if (ls.stalled) {
      // No decrease left to find at working precision.
      const bool negligible = std::abs(directional) <= 1e-10 * (1.0 + std::abs(rec.merit));
      result.status = negligible ? EstimationStatus::kConverged : EstimationStatus::kStalled;
      break;
    }
    alpha = ls.alpha;
    try {
      trace = RunFilterWithSensitivities(spec, alpha, data);
    } catch (const NumericalError& e) {
      result.status = EstimationStatus::kFilterFailure;
      result.message = e.what();
      break;
    }
  }
  if (!std::isfinite(result.objective)) {
    result.objective = ObjectiveValue(spec, result.alpha_hat, data, cfg.kind);
  }
  return result;
}

}  // namespace lingauss
