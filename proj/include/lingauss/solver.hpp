// Constrained Generalized Gauss-Newton SQP for the ML and A-ML problems.
//
// Each iteration runs the filter with forward sensitivities (single shooting),
// builds a convex QP in the parameter step, solves it and globalizes the step
// with a backtracking line search on an ℓ1 merit function.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lingauss/objectives.hpp"
#include "lingauss/qp.hpp"

namespace lingauss {

/// Quadratic model of f(e, S) = eᵀS⁻¹e around (e, S):
///   f'(δe, δS)  = 2 δeᵀMe − eᵀ M δS M e
///   f''(δe, δS) = 2 (δe − δS M e)ᵀ M (δe − δS M e),   M = S⁻¹
class MlQuadraticModel {
 public:
  /// Throws NumericalError when S is not PD.
  MlQuadraticModel(Vector e, const Matrix& S);

  double value() const { return value_; }
  const Matrix& weight() const { return M_; }
  double FirstDerivative(const Vector& de, const Matrix& dS) const;
  double SecondDerivative(const Vector& de, const Matrix& dS) const;
  /// f + f' + ½ f''.
  double Quadratic(const Vector& de, const Matrix& dS) const;

 private:
  Vector e_;
  Matrix M_;
  Vector Me_;
  double value_ = 0.0;
};

struct LineSearchConfig {
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 30;
};

struct SolverConfig {
  int max_iter = 30;
  ObjectiveKind kind = ObjectiveKind::kML;
  /// Run exactly max_iter iterations (experiment parity) instead of stopping
  /// on stop_tol.
  bool fixed_iterations = false;
  /// Compare the assembled gradient with finite differences at every iterate.
  bool fd_check = false;
  LineSearchConfig line_search;
  double merit_penalty = 1e4;
  double stop_tol = 1e-8;
  /// One-parameter models: coarse grid plus golden-section refinement
  /// instead of SQP.
  bool grid_search = false;
  int grid_points = 50;
  /// Bracket for grid mode; infinite box sides fall back to these.
  double grid_lower = 0.0;
  double grid_upper = 5.0;

  void Validate() const;
};

enum class EstimationStatus { kConverged, kMaxIter, kStalled, kQPFailure, kFilterFailure };

std::string_view StatusName(EstimationStatus status);

struct IterateRecord {
  Vector alpha;
  double objective = 0.0;
  double step_norm = 0.0;
  double merit = 0.0;
  double step_length = 0.0;
  double penalty = 0.0;
  double kkt = 0.0;
  double fd_gradient_error = -1.0;  // set when fd_check
};

struct EstimationResult {
  Vector alpha_hat;
  double objective = 0.0;
  std::vector<IterateRecord> iterates;
  EstimationStatus status = EstimationStatus::kMaxIter;
  bool hessian_regularized = false;
  std::string message;

  bool failed() const {
    return status == EstimationStatus::kQPFailure || status == EstimationStatus::kFilterFailure;
  }
};

/// QP in δα from the single-shooting linearization at α. For kAML this is
/// the constrained Gauss-Newton system H = 2ΣJ_kᵀJ_k, g = 2ΣJ_kᵀe_k; for kML
/// H = 2ΣZ_kᵀS_k⁻¹Z_k with Z_k = ∂e_k − ∂S_k S_k⁻¹e_k, and g adds Tr(S_k⁻¹∂S_k).
/// Constraints are linearized: ∇h δα ≤ −h(α). Violated rows are relaxed to
/// keep δα = 0 feasible.
QPSubproblem BuildQP(const Vector& alpha, const FilterTrace& trace, ObjectiveKind kind,
                     const ConstraintSet& constraints);

struct LineSearchResult {
  Vector alpha;
  double step = 0.0;
  double merit = 0.0;
  bool stalled = false;
  int evaluations = 0;
};

/// Backtracking on t ∈ {1, β, β², …} until
///   merit(α + tδ) ≤ merit(α) + c₁ t D,
/// where D < 0 is the merit directional derivative. Evaluation failures count
/// as +∞. Returns t = 0 with `stalled` when no step is accepted.
LineSearchResult LineSearchUpdate(const Vector& alpha, const Vector& delta, double merit0,
                                  double directional_derivative,
                                  const std::function<double(const Vector&)>& merit,
                                  const LineSearchConfig& cfg);

EstimationResult Estimate(const ModelSpec& spec, const MeasurementSeries& data,
                          const SolverConfig& cfg, const Vector& alpha0);

}  // namespace lingauss
