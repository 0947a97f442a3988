// Estimation objectives built on the filter innovations, and the
// trajectory-optimization baseline.
#pragma once

#include <optional>
#include <vector>

#include "lingauss/kalman.hpp"

namespace lingauss {

/// kML weights each innovation by S_k⁻¹ and adds log|S_k| (exact negative
/// log-likelihood up to the dropped (N+1)·n_y·log 2π). kAML uses unit weights
/// and no log-det term.
enum class ObjectiveKind { kML, kAML };

std::string_view ObjectiveName(ObjectiveKind kind);
ObjectiveKind ParseObjectiveKind(std::string_view name);

struct ObjectiveEval {
  double value = 0.0;
  std::optional<Vector> gradient;
  std::vector<double> per_step;
};

/// Per-step loss L(e, S).
double StepLoss(const StepRecord& rec, ObjectiveKind kind);

/// Sum of L(e_k, S_k) over the trace. The gradient needs sensitivities.
ObjectiveEval EvalObjective(const FilterTrace& trace, ObjectiveKind kind,
                            bool with_gradient = false);

/// Convenience: filter at α and evaluate.
ObjectiveEval EvalObjective(const ModelSpec& spec, const Vector& alpha,
                            const MeasurementSeries& data, ObjectiveKind kind,
                            bool with_gradient = false);

/// Objective value only, without storing a trace.
double ObjectiveValue(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                      ObjectiveKind kind);

/// How the trajectory-optimization problem penalizes x_0.
/// A missing covariance leaves x_0 free (flat prior).
struct TOWeights {
  Matrix Q;
  Matrix R;
  std::optional<Matrix> P0;
};

enum class TOSolveMethod { kBlockTridiagonal, kDense };

struct TOEval {
  double value = 0.0;
  std::vector<Vector> x_opt;
};

/// min over 𝒳_N of
///   Σ‖x_{k+1} − A_k x_k − b_k‖²_{Q⁻¹} + Σ‖C_k x_k − y_k‖²_{R⁻¹} + ‖x_0 − x̂_0‖²_{P_0⁻¹}
/// with A, b, C evaluated at α and the weights held fixed. The problem is a
/// linear least-squares problem whose normal equations are block tridiagonal.
/// Throws NumericalError when the normal equations are singular.
TOEval EvalTOInner(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                   const TOWeights& weights,
                   TOSolveMethod method = TOSolveMethod::kBlockTridiagonal);

/// The TO objective at a given trajectory.
double TOObjective(const ModelSpec& spec, const Vector& alpha, const MeasurementSeries& data,
                   const TOWeights& weights, const std::vector<Vector>& x);

/// ε²·Σ(y_{k+1} − y_k)²: the TO value reached on the random-walk model by
/// x_k = ε y_k with α = 1/ε.
double TOCounterexampleBound(const MeasurementSeries& data, double epsilon);

}  // namespace lingauss
