#include "lingauss/objectives.hpp"

#include <string>

namespace lingauss {

std::string_view ObjectiveName(ObjectiveKind kind) {
  return kind == ObjectiveKind::kML ? "ml" : "aml";
}

ObjectiveKind ParseObjectiveKind(std::string_view name) {
  if (name == "ml" || name == "ML") return ObjectiveKind::kML;
  if (name == "aml" || name == "AML" || name == "a-ml" || name == "A-ML") {
    return ObjectiveKind::kAML;
  }
  throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

double StepLoss(const StepRecord& rec, ObjectiveKind kind) {
  if (kind == ObjectiveKind::kML) return rec.e.dot(rec.S_inv * rec.e) + rec.logdet_S;
  return rec.e.squaredNorm();
}

ObjectiveEval EvalObjective(const FilterTrace& trace, ObjectiveKind kind, bool with_gradient) {
  if (with_gradient && !trace.has_sensitivities()) {
    throw std::invalid_argument("objective gradient requested without filter sensitivities");
  }
  ObjectiveEval out;
  out.per_step.reserve(trace.steps.size());
  for (const auto& rec : trace.steps) {
    out.per_step.push_back(StepLoss(rec, kind));
    out.value += out.per_step.back();
  }
  if (!with_gradient) return out;

  const int na = static_cast<int>(trace.sensitivities.front().de.size());
  Vector grad = Vector::Zero(na);
  for (size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& rec = trace.steps[k];
    const StepSensitivity& sens = trace.sensitivities[k];
    if (kind == ObjectiveKind::kAML) {
      for (int i = 0; i < na; ++i) grad[i] += 2.0 * sens.de[i].dot(rec.e);
      continue;
    }
    const Vector Me = rec.S_inv * rec.e;
    for (int i = 0; i < na; ++i) {
      // f' = 2 δeᵀMe − eᵀ M δS M e, plus Tr(S⁻¹ δS) from log|S|.
      grad[i] += 2.0 * sens.de[i].dot(Me) - Me.dot(sens.dS[i] * Me) +
                 (rec.S_inv.cwiseProduct(sens.dS[i])).sum();
    }
  }
  out.gradient = std::move(grad);
  return out;
}

ObjectiveEval EvalObjective(const ModelSpec& spec, const Vector& alpha,
                            const MeasurementSeries& data, ObjectiveKind kind,
                            bool with_gradient) {
  const FilterTrace trace = with_gradient ? RunFilterWithSensitivities(spec, alpha, data)
                                          : RunFilter(spec, alpha, data);
  return EvalObjective(trace, kind, with_gradient);
}

double ObjectiveValue(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                      ObjectiveKind kind) {
  const FilterCost cost = RunFilterCost(spec, alpha, data);
  return kind == ObjectiveKind::kML ? cost.ml : cost.aml;
}

namespace {

Matrix InversePD(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + " must be positive definite");
  }
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

struct NormalEquations {
  std::vector<Matrix> diag;   // D_k
  std::vector<Matrix> lower;  // L_k couples x_{k+1} and x_k
  std::vector<Vector> rhs;
};

NormalEquations Assemble(const ModelSpec& spec, const Vector& alpha,
                         const MeasurementSeries& data, const TOWeights& w) {
  const int nx = spec.n_x;
  const int steps = spec.N + 1;
  const Matrix W = InversePD(w.Q, "TO process weight Q");
  const Matrix V = InversePD(w.R, "TO measurement weight R");
  NormalEquations ne;
  ne.diag.assign(steps, Matrix::Zero(nx, nx));
  ne.lower.assign(spec.N, Matrix::Zero(nx, nx));
  ne.rhs.assign(steps, Vector::Zero(nx));
  if (w.P0) {
    const Matrix P0_inv = InversePD(*w.P0, "TO prior covariance P0");
    ne.diag[0] += P0_inv;
    ne.rhs[0] += P0_inv * spec.x0_mean;
  }
  for (int k = 0; k < steps; ++k) {
    const Matrix C = EvaluateFamily(spec, Family::kC, alpha, k);
    const Matrix CtV = C.transpose() * V;
    ne.diag[k] += CtV * C;
    ne.rhs[k] += CtV * data.y[k];
    if (k == spec.N) break;
    const Matrix A = EvaluateFamily(spec, Family::kA, alpha, k);
    const Vector b = EvaluateFamily(spec, Family::kB, alpha, k);
    const Matrix WA = W * A;
    ne.diag[k + 1] += W;
    ne.diag[k] += A.transpose() * WA;
    ne.lower[k] = -WA;
    ne.rhs[k + 1] += W * b;
    ne.rhs[k] -= WA.transpose() * b;
  }
  return ne;
}

// Block Cholesky of a symmetric block-tridiagonal matrix.
std::vector<Vector> SolveBlockTridiagonal(const NormalEquations& ne) {
  const size_t steps = ne.diag.size();
  std::vector<Eigen::LLT<Matrix>> factors(steps);
  std::vector<Matrix> off(steps);  // L_{k,k-1} factor blocks
  std::vector<Vector> z(steps);
  for (size_t k = 0; k < steps; ++k) {
    Matrix D = ne.diag[k];
    Vector r = ne.rhs[k];
    if (k > 0) {
      D -= off[k] * off[k].transpose();
      r -= off[k] * z[k - 1];
    }
    factors[k].compute(D);
    const double scale = std::max(1.0, ne.diag[k].diagonal().cwiseAbs().maxCoeff());
    if (factors[k].info() != Eigen::Success ||
        factors[k].matrixL().toDenseMatrix().diagonal().array().square().minCoeff() <=
            1e-13 * scale) {
      throw NumericalError("trajectory normal equations are singular at k=" + std::to_string(k),
                           static_cast<int>(k));
    }
    z[k] = factors[k].matrixL().solve(r);
    if (k + 1 < steps) {
      // off[k+1] = lower[k] · L_k⁻ᵀ
      off[k + 1] = factors[k]
                       .matrixL()
                       .solve(ne.lower[k].transpose())
                       .transpose();
    }
  }
  std::vector<Vector> x(steps);
  for (size_t kk = steps; kk-- > 0;) {
    Vector r = z[kk];
    if (kk + 1 < steps) r -= off[kk + 1].transpose() * x[kk + 1];
    x[kk] = factors[kk].matrixU().solve(r);
  }
  return x;
}

std::vector<Vector> SolveDense(const NormalEquations& ne) {
  const int steps = static_cast<int>(ne.diag.size());
  const int nx = static_cast<int>(ne.diag[0].rows());
  Matrix H = Matrix::Zero(steps * nx, steps * nx);
  Vector r(steps * nx);
  for (int k = 0; k < steps; ++k) {
    H.block(k * nx, k * nx, nx, nx) = ne.diag[k];
    r.segment(k * nx, nx) = ne.rhs[k];
    if (k + 1 < steps) {
      H.block((k + 1) * nx, k * nx, nx, nx) = ne.lower[k];
      H.block(k * nx, (k + 1) * nx, nx, nx) = ne.lower[k].transpose();
    }
  }
  Eigen::LDLT<Matrix> ldlt(H);
  const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
    throw NumericalError("trajectory normal equations are singular");
  }
  const Vector sol = ldlt.solve(r);
  std::vector<Vector> x(steps);
  for (int k = 0; k < steps; ++k) x[k] = sol.segment(k * nx, nx);
  return x;
}

}  // namespace

double TOObjective(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                   const TOWeights& weights, const std::vector<Vector>& x) {
  const Matrix W = InversePD(weights.Q, "TO process weight Q");
  const Matrix V = InversePD(weights.R, "TO measurement weight R");
  double value = 0.0;
  if (weights.P0) {
    const Vector d = x[0] - spec.x0_mean;
    value += d.dot(InversePD(*weights.P0, "TO prior covariance P0") * d);
  }
  for (int k = 0; k <= spec.N; ++k) {
    const Vector r = EvaluateFamily(spec, Family::kC, alpha, k) * x[k] - data.y[k];
    value += r.dot(V * r);
    if (k == spec.N) break;
    const Vector d = x[k + 1] - EvaluateFamily(spec, Family::kA, alpha, k) * x[k] -
                     EvaluateFamily(spec, Family::kB, alpha, k);
    value += d.dot(W * d);
  }
  return value;
}

TOEval EvalTOInner(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                   const TOWeights& weights, TOSolveMethod method) {
  if (static_cast<int>(data.y.size()) != spec.N + 1) {
    throw std::invalid_argument("measurement series length does not match the model horizon");
  }
  const NormalEquations ne = Assemble(spec, alpha, data, weights);
  TOEval out;
  out.x_opt = method == TOSolveMethod::kDense ? SolveDense(ne) : SolveBlockTridiagonal(ne);
  out.value = TOObjective(spec, alpha, data, weights, out.x_opt);
  return out;
}

double TOCounterexampleBound(const MeasurementSeries& data, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  double sum = 0.0;
  for (size_t k = 0; k + 1 < data.y.size(); ++k) sum += (data.y[k + 1] - data.y[k]).squaredNorm();
  return epsilon * epsilon * sum;
}

}  // namespace lingauss
