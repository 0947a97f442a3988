#include "lingauss/kalman.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lingauss {

namespace {

void Symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

struct Factorized {
  Matrix S;
  Matrix S_inv;
  double logdet = 0.0;
};

// S must be PD with smallest Cholesky pivot above 1e-12 of its largest diagonal.
Factorized FactorInnovation(Matrix S, int k) {
  Symmetrize(S);
  Eigen::LLT<Matrix> llt(S);
  const double max_diag = S.diagonal().maxCoeff();
  if (llt.info() != Eigen::Success || !(max_diag > 0.0) || !S.allFinite()) {
    throw NumericalError("innovation covariance is not positive definite at k=" +
                             std::to_string(k),
                         k);
  }
  const Vector l_diag = llt.matrixL().toDenseMatrix().diagonal();
  if (l_diag.array().square().minCoeff() <= 1e-12 * max_diag) {
    throw NumericalError("innovation covariance is numerically singular at k=" +
                             std::to_string(k),
                         k);
  }
  Factorized f;
  f.logdet = 2.0 * l_diag.array().log().sum();
  f.S_inv = llt.solve(Matrix::Identity(S.rows(), S.cols()));
  Symmetrize(f.S_inv);
  f.S = std::move(S);
  return f;
}

void CheckInputs(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data) {
  if (alpha.size() != spec.n_alpha || !alpha.allFinite()) {
    throw std::invalid_argument("parameter vector must have n_alpha finite entries");
  }
  if (static_cast<int>(data.y.size()) != spec.N + 1) {
    throw std::invalid_argument("measurement series has " + std::to_string(data.y.size()) +
                                " samples, model expects N+1 = " + std::to_string(spec.N + 1));
  }
  for (const auto& y : data.y) {
    if (y.size() != spec.n_y) throw std::invalid_argument("measurement has wrong dimension");
  }
}

FilterState InitialState(const ModelSpec& spec) { return {spec.x0_mean, spec.x0_cov}; }

StepRecord InnovateAt(const FilterState& state, const Matrix& C, const Matrix& R,
                      const Vector& y, int k) {
  const Matrix PCt = state.P * C.transpose();
  Factorized f = FactorInnovation(C * PCt + R, k);
  StepRecord rec;
  rec.e = y - C * state.x_hat;
  rec.K = PCt * f.S_inv;
  rec.S = std::move(f.S);
  rec.S_inv = std::move(f.S_inv);
  rec.logdet_S = f.logdet;
  return rec;
}

FilterState Predict(const FilterState& state, const StepRecord& rec, const ModelMatrices& m,
                    const Matrix& C) {
  FilterState next;
  const Vector x_upd = state.x_hat + rec.K * rec.e;
  const Matrix P_upd = state.P - rec.K * (C * state.P);
  next.x_hat = m.A * x_upd + m.b;
  next.P = m.A * P_upd * m.A.transpose() + m.Q;
  Symmetrize(next.P);
  return next;
}

}  // namespace

StepRecord Innovate(const FilterState& state, const Matrix& C, const Matrix& R, const Vector& y) {
  return InnovateAt(state, C, R, y, -1);
}

std::pair<FilterState, StepRecord> KalmanStep(const FilterState& state,
                                              const ModelMatrices& matrices, const Vector& y) {
  if (matrices.A.size() == 0) throw std::invalid_argument("KalmanStep needs A, b and Q");
  StepRecord rec = InnovateAt(state, matrices.C, matrices.R, y, -1);
  FilterState next = Predict(state, rec, matrices, matrices.C);
  return {std::move(next), std::move(rec)};
}

FilterTrace RunFilter(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data) {
  CheckInputs(spec, alpha, data);
  FilterTrace trace;
  trace.steps.reserve(spec.N + 1);
  trace.states.reserve(spec.N + 1);
  FilterState state = InitialState(spec);
  for (int k = 0; k <= spec.N; ++k) {
    const ModelMatrices m = EvaluateMatrices(spec, alpha, k);
    StepRecord rec = InnovateAt(state, m.C, m.R, data.y[k], k);
    FilterState next;
    if (k < spec.N) next = Predict(state, rec, m, m.C);
    trace.states.push_back(std::move(state));
    trace.steps.push_back(std::move(rec));
    state = std::move(next);
  }
  return trace;
}

FilterCost RunFilterCost(const ModelSpec& spec, const Vector& alpha,
                         const MeasurementSeries& data) {
  CheckInputs(spec, alpha, data);
  FilterCost cost;
  FilterState state = InitialState(spec);
  for (int k = 0; k <= spec.N; ++k) {
    const ModelMatrices m = EvaluateMatrices(spec, alpha, k);
    const StepRecord rec = InnovateAt(state, m.C, m.R, data.y[k], k);
    cost.ml += rec.e.dot(rec.S_inv * rec.e) + rec.logdet_S;
    cost.aml += rec.e.squaredNorm();
    if (k < spec.N) state = Predict(state, rec, m, m.C);
  }
  return cost;
}

FilterTrace RunFilterWithSensitivities(const ModelSpec& spec, const Vector& alpha,
                                       const MeasurementSeries& data) {
  CheckInputs(spec, alpha, data);
  const int na = spec.n_alpha;
  const int nx = spec.n_x;
  FilterTrace trace;
  trace.steps.reserve(spec.N + 1);
  trace.states.reserve(spec.N + 1);
  trace.sensitivities.reserve(spec.N + 1);

  FilterState state = InitialState(spec);
  // ∂x̂_0/∂α = 0 and ∂P_0/∂α = 0: the initial belief is fixed.
  std::vector<Vector> dx(na, Vector::Zero(nx));
  std::vector<Matrix> dP(na, Matrix::Zero(nx, nx));

  for (int k = 0; k <= spec.N; ++k) {
    const ModelMatrices m = EvaluateMatrices(spec, alpha, k);
    StepRecord rec = InnovateAt(state, m.C, m.R, data.y[k], k);

    StepSensitivity sens;
    sens.dx_hat = dx;
    sens.dP = dP;
    sens.de.resize(na);
    sens.dS.resize(na);

    const Matrix Ct = m.C.transpose();
    const Matrix PCt = state.P * Ct;
    const Vector x_upd = state.x_hat + rec.K * rec.e;
    const Matrix CP = m.C * state.P;
    const Matrix P_upd = state.P - rec.K * CP;

    std::vector<Vector> dx_next(na);
    std::vector<Matrix> dP_next(na);
    for (int i = 0; i < na; ++i) {
      const Matrix dC = spec.C.Derivative(k, i);
      const Matrix dR = MatrixDerivative(spec, k, Family::kR, i);
      Matrix dS = dC * PCt + m.C * dP[i] * Ct + PCt.transpose() * dC.transpose() + dR;
      Symmetrize(dS);
      const Vector de = -dC * state.x_hat - m.C * dx[i];
      sens.de[i] = de;
      sens.dS[i] = dS;
      if (k == spec.N) continue;

      const Matrix dS_inv = -rec.S_inv * dS * rec.S_inv;
      const Matrix dK = dP[i] * Ct * rec.S_inv + state.P * dC.transpose() * rec.S_inv +
                        PCt * dS_inv;
      const Vector dx_upd = dx[i] + dK * rec.e + rec.K * de;
      const Matrix dP_upd = dP[i] - dK * CP - rec.K * (dC * state.P) - rec.K * (m.C * dP[i]);

      const Matrix& dA = spec.A.Derivative(k, i);
      const Matrix& db = spec.b.Derivative(k, i);
      const Matrix dQ = MatrixDerivative(spec, k, Family::kQ, i);
      dx_next[i] = dA * x_upd + m.A * dx_upd + db;
      const Matrix dAPAt = dA * P_upd * m.A.transpose();
      dP_next[i] = dAPAt + dAPAt.transpose() + m.A * dP_upd * m.A.transpose() + dQ;
      Symmetrize(dP_next[i]);
    }

    FilterState next;
    if (k < spec.N) next = Predict(state, rec, m, m.C);
    trace.states.push_back(std::move(state));
    trace.steps.push_back(std::move(rec));
    trace.sensitivities.push_back(std::move(sens));
    state = std::move(next);
    if (k < spec.N) {
      dx = std::move(dx_next);
      dP = std::move(dP_next);
    }
  }
  return trace;
}

std::pair<Vector, Matrix> StackedMeasurementMoments(const ModelSpec& spec, const Vector& alpha) {
  const int ny = spec.n_y;
  const int steps = spec.N + 1;

  // State means and the full block covariance Cov(x_j, x_k).
  std::vector<Vector> mean(steps);
  std::vector<std::vector<Matrix>> cov(steps, std::vector<Matrix>(steps));
  std::vector<ModelMatrices> mats(steps);
  for (int k = 0; k < steps; ++k) mats[k] = EvaluateMatrices(spec, alpha, k);

  mean[0] = spec.x0_mean;
  cov[0][0] = spec.x0_cov;
  for (int k = 0; k + 1 < steps; ++k) {
    const Matrix& A = mats[k].A;
    mean[k + 1] = A * mean[k] + mats[k].b;
    for (int j = 0; j <= k; ++j) {
      cov[k + 1][j] = A * cov[k][j];
      cov[j][k + 1] = cov[k + 1][j].transpose();
    }
    cov[k + 1][k + 1] = A * cov[k][k] * A.transpose() + mats[k].Q;
  }

  Vector y_mean(steps * ny);
  Matrix y_cov(steps * ny, steps * ny);
  for (int j = 0; j < steps; ++j) {
    y_mean.segment(j * ny, ny) = mats[j].C * mean[j];
    for (int k = 0; k < steps; ++k) {
      Matrix block = mats[j].C * cov[j][k] * mats[k].C.transpose();
      if (j == k) block += mats[k].R;
      y_cov.block(j * ny, k * ny, ny, ny) = block;
    }
  }
  return {y_mean, 0.5 * (y_cov + y_cov.transpose())};
}

double StackedLogLikelihood(const ModelSpec& spec, const Vector& alpha,
                            const MeasurementSeries& data) {
  CheckInputs(spec, alpha, data);
  const auto [mean, cov] = StackedMeasurementMoments(spec, alpha);
  const int n = static_cast<int>(mean.size());
  Vector y(n);
  for (int k = 0; k <= spec.N; ++k) y.segment(k * spec.n_y, spec.n_y) = data.y[k];
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("stacked measurement covariance is not positive definite");
  }
  const Vector r = y - mean;
  const Vector z = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (z.squaredNorm() + logdet + n * std::log(2.0 * std::numbers::pi));
}

}  // namespace lingauss
