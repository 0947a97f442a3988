// Kalman filter recursion, innovation quantities and forward sensitivities.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lingauss/model.hpp"

namespace lingauss {

/// Measurements y_0..y_N plus optional simulation metadata.
struct MeasurementSeries {
  std::vector<Vector> y;
  std::optional<Vector> true_alpha;
  std::vector<Vector> true_states;
  std::optional<std::uint64_t> seed;

  int horizon() const { return static_cast<int>(y.size()) - 1; }
  int n_y() const { return y.empty() ? 0 : static_cast<int>(y.front().size()); }
};

/// Predicted state mean x̂_k and covariance P_k given 𝒴_{k-1}.
struct FilterState {
  Vector x_hat;
  Matrix P;
};

struct StepRecord {
  Vector e;  // innovation y_k − C_k x̂_k
  Matrix S;  // innovation covariance C_k P_k C_kᵀ + R_k
  Matrix S_inv;
  Matrix K;  // filter gain P_k C_kᵀ S_k⁻¹
  double logdet_S = 0.0;
};

/// Derivatives of one step's quantities with respect to each α_i.
struct StepSensitivity {
  std::vector<Vector> dx_hat;
  std::vector<Matrix> dP;
  std::vector<Vector> de;
  std::vector<Matrix> dS;
};

struct FilterTrace {
  std::vector<StepRecord> steps;    // k = 0..N
  std::vector<FilterState> states;  // k = 0..N, the predictions used at step k
  std::vector<StepSensitivity> sensitivities;  // empty unless requested

  bool has_sensitivities() const { return !sensitivities.empty(); }
};

/// One predict/update cycle. `matrices` must hold A, b, Q (i.e. k < N).
///
///   S = C P Cᵀ + R,  K = P Cᵀ S⁻¹,  e = y − C x̂
///   x̂⁺ = A (x̂ + K e) + b,  P⁺ = A (P − K C P) Aᵀ + Q
///
/// Throws NumericalError when S is not numerically PD.
std::pair<FilterState, StepRecord> KalmanStep(const FilterState& state,
                                              const ModelMatrices& matrices, const Vector& y);

/// Innovation record only (the measurement half of KalmanStep); used at k = N.
StepRecord Innovate(const FilterState& state, const Matrix& C, const Matrix& R, const Vector& y);

FilterTrace RunFilter(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data);
FilterTrace RunFilterWithSensitivities(const ModelSpec& spec, const Vector& alpha,
                                       const MeasurementSeries& data);

/// Σ_k [eᵀS⁻¹e + log|S|] and Σ_k ‖e‖² without storing the trace.
struct FilterCost {
  double ml = 0.0;
  double aml = 0.0;
};
FilterCost RunFilterCost(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data);

/// log p(𝒴_N | α) from the dense joint Gaussian of the stacked measurements.
/// Test-scale reference only: cost is cubic in (N+1)·n_y.
double StackedLogLikelihood(const ModelSpec& spec, const Vector& alpha,
                            const MeasurementSeries& data);

/// Mean and covariance of the stacked measurement vector (y_0; …; y_N).
std::pair<Vector, Matrix> StackedMeasurementMoments(const ModelSpec& spec, const Vector& alpha);

}  // namespace lingauss
