// Parametric linear-Gaussian state-space models.
//
//   x_{k+1} = A_k(α) x_k + b_k(α) + w_k,   w_k ~ N(0, Q_k(α)),  k = 0..N-1
//   y_k     = C_k(α) x_k + v_k,            v_k ~ N(0, R_k(α)),  k = 0..N
//   x_0     ~ N(x̂_0, P_0)
//
// Every matrix family is affine in α, which makes parameter derivatives exact
// and independent of α.
#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lingauss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a numerical quantity that must be PD or finite is not.
/// `step` is the time index at which the failure occurred, or -1.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step = -1)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

enum class Family { kA, kB, kC, kQ, kR };

std::string_view FamilyName(Family family);
Family ParseFamily(std::string_view name);

/// M_k(α) = M_k^0 + Σ_i α_i M_k^{i+1}.
///
/// A time-invariant family stores one basis that is broadcast over k.
class AffineMatrixFamily {
 public:
  AffineMatrixFamily() = default;

  /// `basis[k][j]`, j = 0 is the offset and j = i + 1 multiplies α_i.
  AffineMatrixFamily(int rows, int cols, bool time_varying,
                     std::vector<std::vector<Matrix>> basis);

  /// Time-invariant family with the given offset and per-parameter coefficients.
  static AffineMatrixFamily Constant(const Matrix& offset, int n_alpha);
  static AffineMatrixFamily TimeInvariant(std::vector<Matrix> basis);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int n_alpha() const { return n_alpha_; }
  bool time_varying() const { return time_varying_; }
  /// Number of stored time entries (1 when time-invariant).
  int num_entries() const { return static_cast<int>(basis_.size()); }

  Matrix Evaluate(int k, const Vector& alpha) const;
  /// Exact ∂M_k/∂α_param.
  const Matrix& Derivative(int k, int param) const;
  const Matrix& Offset(int k) const;
  /// False when the coefficient of α_param is zero for every k.
  bool DependsOn(int param) const { return depends_[param]; }

  const std::vector<std::vector<Matrix>>& basis() const { return basis_; }

 private:
  const std::vector<Matrix>& Entry(int k) const;

  int rows_ = 0;
  int cols_ = 0;
  int n_alpha_ = 0;
  bool time_varying_ = false;
  std::vector<std::vector<Matrix>> basis_;
  std::vector<bool> depends_;
};

/// A general convex inequality h(α) ≤ 0 with its gradient.
struct ConvexResidual {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// 𝒜 = {α | h(α) ≤ 0}: box bounds, linear rows Gα ≤ g and optional general
/// convex residuals. Infinite box entries are ignored.
struct ConstraintSet {
  std::optional<Vector> lower;
  std::optional<Vector> upper;
  Matrix G;  // 0 rows when unused
  Vector g;
  std::vector<ConvexResidual> convex;

  int NumResiduals() const;
  /// Adds the equality rowᵀα = value as two opposite inequality rows, e.g. to
  /// fix the free scale of an A-ML problem.
  void AddEqualityPin(const Vector& row, double value);
};

struct ConstraintEval {
  Vector residual;  // h(α), ≤ 0 iff feasible
  Matrix jacobian;  // ∇h(α), one row per residual
};

/// Residual order: finite lower bounds (l_i − α_i) by index, finite upper
/// bounds (α_i − u_i) by index, linear rows, convex residuals.
ConstraintEval EvalConstraints(const ConstraintSet& cs, const Vector& alpha);
/// Largest positive residual, 0 when feasible.
double ConstraintViolation(const ConstraintSet& cs, const Vector& alpha);

struct ModelMatrices {
  Matrix A;  // empty at k = N
  Vector b;  // empty at k = N
  Matrix C;
  Matrix Q;  // empty at k = N
  Matrix R;
};

struct ModelSpec {
  int n_x = 0;
  int n_y = 0;
  int n_alpha = 0;
  int N = 0;
  AffineMatrixFamily A, b, C, Q, R;
  Vector x0_mean;
  Matrix x0_cov;
  ConstraintSet constraints;
  std::vector<std::string> param_names;

  const AffineMatrixFamily& family(Family f) const;

  /// Checks every shape and horizon invariant; throws std::invalid_argument.
  void Validate() const;
};

/// All matrices at step k; A, b, Q are left empty for k = N. Q and R are
/// returned symmetrized.
ModelMatrices EvaluateMatrices(const ModelSpec& spec, const Vector& alpha, int k);
Matrix EvaluateFamily(const ModelSpec& spec, Family family, const Vector& alpha, int k);
/// ∂M_k/∂α_param for the named family (Q and R derivatives symmetrized).
Matrix MatrixDerivative(const ModelSpec& spec, int k, Family family, int param);

/// True when the symmetric matrix admits an LDLᵀ factorization whose smallest
/// pivot exceeds 1e-12 times its largest diagonal entry.
bool IsPositiveDefinite(const Matrix& m);

struct ValidationReport {
  bool feasible = true;
  int first_violated_constraint = -1;
  double max_violation = 0.0;
  bool q_positive_definite = true;
  int first_bad_q_step = -1;
  bool r_positive_definite = true;
  int first_bad_r_step = -1;

  bool ok() const { return feasible && q_positive_definite && r_positive_definite; }
  std::string Describe() const;
};

ValidationReport ValidateParameters(const ModelSpec& spec, const Vector& alpha,
                                    double feasibility_tol = 0.0);

/// Output-disturbance augmentation for offset-free control:
///
///   x_{k+1} = A x_k + b + w^x,  d_{k+1} = d_k + w^d,  y_k = C x_k + d_k + v_k
///
/// The base Q and R families are replaced by α_{n}·blkdiag(Q_x, 0) +
/// α_{n+1}·blkdiag(0, Q_d) and α_{n+2}·R, so three parameters are appended.
/// The disturbance starts at d_0 = 0 with covariance `d0_cov` (zero by default).
ModelSpec AugmentWithDisturbance(const ModelSpec& spec, const Matrix& q_x,
                                 const Matrix& q_d, const Matrix& r,
                                 const std::optional<Matrix>& d0_cov = std::nullopt);

}  // namespace lingauss
