#include "lingauss/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lingauss {

namespace {

Matrix Symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void Require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::string_view FamilyName(Family family) {
  switch (family) {
    case Family::kA: return "A";
    case Family::kB: return "b";
    case Family::kC: return "C";
    case Family::kQ: return "Q";
    case Family::kR: return "R";
  }
  return "?";
}

Family ParseFamily(std::string_view name) {
  if (name == "A") return Family::kA;
  if (name == "b" || name == "B") return Family::kB;
  if (name == "C") return Family::kC;
  if (name == "Q") return Family::kQ;
  if (name == "R") return Family::kR;
  throw std::invalid_argument("unknown matrix family '" + std::string(name) + "'");
}

AffineMatrixFamily::AffineMatrixFamily(int rows, int cols, bool time_varying,
                                       std::vector<std::vector<Matrix>> basis)
    : rows_(rows), cols_(cols), time_varying_(time_varying), basis_(std::move(basis)) {
  Require(rows > 0 && cols > 0, "matrix family needs positive dimensions");
  Require(!basis_.empty(), "matrix family needs at least one basis entry");
  Require(time_varying_ || basis_.size() == 1,
          "time-invariant family must store exactly one basis entry");
  Require(!basis_.front().empty(), "basis entry must contain the offset matrix");
  n_alpha_ = static_cast<int>(basis_.front().size()) - 1;
  depends_.assign(n_alpha_, false);
  for (const auto& entry : basis_) {
    Require(static_cast<int>(entry.size()) == n_alpha_ + 1,
            "every basis entry needs n_alpha + 1 matrices");
    for (int j = 0; j <= n_alpha_; ++j) {
      const Matrix& m = entry[j];
      Require(m.rows() == rows_ && m.cols() == cols_, "basis matrix has wrong shape");
      Require(m.allFinite(), "basis matrix has non-finite entries");
      if (j > 0 && !m.isZero(0.0)) depends_[j - 1] = true;
    }
  }
}

AffineMatrixFamily AffineMatrixFamily::Constant(const Matrix& offset, int n_alpha) {
  std::vector<Matrix> entry(n_alpha + 1, Matrix::Zero(offset.rows(), offset.cols()));
  entry[0] = offset;
  return AffineMatrixFamily(static_cast<int>(offset.rows()), static_cast<int>(offset.cols()),
                            false, {std::move(entry)});
}

AffineMatrixFamily AffineMatrixFamily::TimeInvariant(std::vector<Matrix> basis) {
  Require(!basis.empty(), "basis must contain the offset matrix");
  const int rows = static_cast<int>(basis[0].rows());
  const int cols = static_cast<int>(basis[0].cols());
  return AffineMatrixFamily(rows, cols, false, {std::move(basis)});
}

const std::vector<Matrix>& AffineMatrixFamily::Entry(int k) const {
  if (!time_varying_) {
    if (k < 0) throw std::out_of_range("negative time index");
    return basis_.front();
  }
  if (k < 0 || k >= num_entries()) {
    throw std::out_of_range("time index " + std::to_string(k) + " outside family horizon");
  }
  return basis_[k];
}

Matrix AffineMatrixFamily::Evaluate(int k, const Vector& alpha) const {
  if (alpha.size() != n_alpha_) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(alpha.size()) +
                                ", family expects " + std::to_string(n_alpha_));
  }
  const auto& entry = Entry(k);
  Matrix m = entry[0];
  for (int i = 0; i < n_alpha_; ++i) {
    if (depends_[i] && alpha[i] != 0.0) m.noalias() += alpha[i] * entry[i + 1];
  }
  return m;
}

const Matrix& AffineMatrixFamily::Derivative(int k, int param) const {
  if (param < 0 || param >= n_alpha_) {
    throw std::out_of_range("parameter index " + std::to_string(param) + " out of range");
  }
  return Entry(k)[param + 1];
}

const Matrix& AffineMatrixFamily::Offset(int k) const { return Entry(k)[0]; }

int ConstraintSet::NumResiduals() const {
  int n = 0;
  if (lower) n += static_cast<int>(lower->array().isFinite().count());
  if (upper) n += static_cast<int>(upper->array().isFinite().count());
  return n + static_cast<int>(G.rows()) + static_cast<int>(convex.size());
}

void ConstraintSet::AddEqualityPin(const Vector& row, double value) {
  const Eigen::Index n = row.size();
  if (G.rows() > 0 && G.cols() != n) throw std::invalid_argument("pin row has wrong length");
  Matrix G2(G.rows() + 2, n);
  Vector g2(G.rows() + 2);
  if (G.rows() > 0) {
    G2.topRows(G.rows()) = G;
    g2.head(G.rows()) = g;
  }
  G2.row(G.rows()) = row.transpose();
  G2.row(G.rows() + 1) = -row.transpose();
  g2[G.rows()] = value;
  g2[G.rows() + 1] = -value;
  G = std::move(G2);
  g = std::move(g2);
}

ConstraintEval EvalConstraints(const ConstraintSet& cs, const Vector& alpha) {
  const int n = static_cast<int>(alpha.size());
  const int m = cs.NumResiduals();
  ConstraintEval out{Vector::Zero(m), Matrix::Zero(m, n)};
  int row = 0;
  if (cs.lower) {
    if (cs.lower->size() != n) throw std::invalid_argument("lower bound has wrong length");
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite((*cs.lower)[i])) continue;
      out.residual[row] = (*cs.lower)[i] - alpha[i];
      out.jacobian(row, i) = -1.0;
      ++row;
    }
  }
  if (cs.upper) {
    if (cs.upper->size() != n) throw std::invalid_argument("upper bound has wrong length");
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite((*cs.upper)[i])) continue;
      out.residual[row] = alpha[i] - (*cs.upper)[i];
      out.jacobian(row, i) = 1.0;
      ++row;
    }
  }
  if (cs.G.rows() > 0) {
    if (cs.G.cols() != n || cs.g.size() != cs.G.rows()) {
      throw std::invalid_argument("linear constraint rows have wrong shape");
    }
    out.residual.segment(row, cs.G.rows()) = cs.G * alpha - cs.g;
    out.jacobian.middleRows(row, cs.G.rows()) = cs.G;
    row += static_cast<int>(cs.G.rows());
  }
  for (const auto& c : cs.convex) {
    out.residual[row] = c.value(alpha);
    out.jacobian.row(row) = c.gradient(alpha).transpose();
    ++row;
  }
  return out;
}

double ConstraintViolation(const ConstraintSet& cs, const Vector& alpha) {
  const ConstraintEval e = EvalConstraints(cs, alpha);
  return e.residual.size() == 0 ? 0.0 : std::max(0.0, e.residual.maxCoeff());
}

const AffineMatrixFamily& ModelSpec::family(Family f) const {
  switch (f) {
    case Family::kA: return A;
    case Family::kB: return b;
    case Family::kC: return C;
    case Family::kQ: return Q;
    case Family::kR: return R;
  }
  throw std::invalid_argument("bad family");
}

void ModelSpec::Validate() const {
  Require(n_x > 0 && n_y > 0 && n_alpha >= 0 && N >= 0, "model dimensions must be positive");
  auto check = [&](const AffineMatrixFamily& f, Family name, int rows, int cols, int entries) {
    const std::string tag(FamilyName(name));
    Require(f.rows() == rows && f.cols() == cols, "family " + tag + " has wrong shape");
    Require(f.n_alpha() == n_alpha, "family " + tag + " has wrong parameter count");
    Require(!f.time_varying() || f.num_entries() == entries,
            "time-varying family " + tag + " needs " + std::to_string(entries) + " entries");
  };
  check(A, Family::kA, n_x, n_x, N);
  check(b, Family::kB, n_x, 1, N);
  check(C, Family::kC, n_y, n_x, N + 1);
  check(Q, Family::kQ, n_x, n_x, N);
  check(R, Family::kR, n_y, n_y, N + 1);
  Require(x0_mean.size() == n_x, "x0_mean has wrong length");
  Require(x0_cov.rows() == n_x && x0_cov.cols() == n_x, "x0_cov has wrong shape");
  Require(x0_cov.isApprox(x0_cov.transpose(), 1e-12) || x0_cov.isZero(0.0),
          "x0_cov must be symmetric");
  if (n_x > 0 && !x0_cov.isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(x0_cov, Eigen::EigenvaluesOnly);
    Require(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, x0_cov.diagonal().maxCoeff()),
            "x0_cov must be positive semi-definite");
  }
  Require(param_names.empty() || static_cast<int>(param_names.size()) == n_alpha,
          "param_names must have n_alpha entries");
}

Matrix EvaluateFamily(const ModelSpec& spec, Family family, const Vector& alpha, int k) {
  const bool transition = family == Family::kA || family == Family::kB || family == Family::kQ;
  const int last = transition ? spec.N - 1 : spec.N;
  if (k < 0 || k > last) {
    throw std::out_of_range("time index " + std::to_string(k) + " out of range for family " +
                            std::string(FamilyName(family)));
  }
  Matrix m = spec.family(family).Evaluate(k, alpha);
  if (family == Family::kQ || family == Family::kR) m = Symmetrized(m);
  return m;
}

ModelMatrices EvaluateMatrices(const ModelSpec& spec, const Vector& alpha, int k) {
  if (alpha.size() != spec.n_alpha) {
    throw std::invalid_argument("parameter vector length does not match n_alpha");
  }
  if (k < 0 || k > spec.N) throw std::out_of_range("time index out of range");
  ModelMatrices m;
  m.C = EvaluateFamily(spec, Family::kC, alpha, k);
  m.R = EvaluateFamily(spec, Family::kR, alpha, k);
  if (k < spec.N) {
    m.A = EvaluateFamily(spec, Family::kA, alpha, k);
    m.b = EvaluateFamily(spec, Family::kB, alpha, k);
    m.Q = EvaluateFamily(spec, Family::kQ, alpha, k);
  }
  return m;
}

Matrix MatrixDerivative(const ModelSpec& spec, int k, Family family, int param) {
  Matrix d = spec.family(family).Derivative(k, param);
  if (family == Family::kQ || family == Family::kR) d = Symmetrized(d);
  return d;
}

bool IsPositiveDefinite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  const Matrix sym = Symmetrized(m);
  const double max_diag = sym.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) return false;
  Eigen::LDLT<Matrix> ldlt(sym);
  if (ldlt.info() != Eigen::Success) return false;
  return ldlt.vectorD().minCoeff() > 1e-12 * max_diag;
}

std::string ValidationReport::Describe() const {
  std::ostringstream os;
  if (ok()) return "ok";
  if (!feasible) {
    os << "infeasible (constraint " << first_violated_constraint << ", violation "
       << max_violation << ") ";
  }
  if (!q_positive_definite) os << "Q not PD at k=" << first_bad_q_step << ' ';
  if (!r_positive_definite) os << "R not PD at k=" << first_bad_r_step << ' ';
  std::string s = os.str();
  if (!s.empty()) s.pop_back();
  return s;
}

ValidationReport ValidateParameters(const ModelSpec& spec, const Vector& alpha,
                                    double feasibility_tol) {
  ValidationReport report;
  if (alpha.size() != spec.n_alpha || !alpha.allFinite()) {
    report.feasible = false;
    report.max_violation = std::numeric_limits<double>::infinity();
    return report;
  }
  const ConstraintEval h = EvalConstraints(spec.constraints, alpha);
  for (int i = 0; i < h.residual.size(); ++i) {
    if (h.residual[i] > feasibility_tol) {
      if (report.feasible) report.first_violated_constraint = i;
      report.feasible = false;
      report.max_violation = std::max(report.max_violation, h.residual[i]);
    }
  }
  const int q_steps = spec.Q.time_varying() ? spec.N : std::min(spec.N, 1);
  for (int k = 0; k < q_steps; ++k) {
    if (!IsPositiveDefinite(EvaluateFamily(spec, Family::kQ, alpha, k))) {
      report.q_positive_definite = false;
      report.first_bad_q_step = k;
      break;
    }
  }
  const int r_steps = spec.R.time_varying() ? spec.N + 1 : 1;
  for (int k = 0; k < r_steps; ++k) {
    if (!IsPositiveDefinite(EvaluateFamily(spec, Family::kR, alpha, k))) {
      report.r_positive_definite = false;
      report.first_bad_r_step = k;
      break;
    }
  }
  return report;
}

namespace {

// Re-embeds each basis entry of `f` into a family with `extra` trailing zero
// parameter coefficients, applying `embed` to every matrix.
AffineMatrixFamily Extend(const AffineMatrixFamily& f, int extra, int rows, int cols,
                          const std::function<Matrix(const Matrix&, bool)>& embed) {
  std::vector<std::vector<Matrix>> basis;
  basis.reserve(f.basis().size());
  for (const auto& entry : f.basis()) {
    std::vector<Matrix> out;
    out.reserve(entry.size() + extra);
    for (size_t j = 0; j < entry.size(); ++j) out.push_back(embed(entry[j], j == 0));
    for (int j = 0; j < extra; ++j) out.push_back(Matrix::Zero(rows, cols));
    basis.push_back(std::move(out));
  }
  return AffineMatrixFamily(rows, cols, f.time_varying(), std::move(basis));
}

}  // namespace

ModelSpec AugmentWithDisturbance(const ModelSpec& spec, const Matrix& q_x, const Matrix& q_d,
                                 const Matrix& r, const std::optional<Matrix>& d0_cov) {
  spec.Validate();
  const int nx = spec.n_x;
  const int ny = spec.n_y;
  const int na = spec.n_alpha;
  Require(q_x.rows() == nx && q_x.cols() == nx, "Q_x must be n_x by n_x");
  Require(q_d.rows() == ny && q_d.cols() == ny, "Q_d must be n_y by n_y");
  Require(r.rows() == ny && r.cols() == ny, "R must be n_y by n_y");
  if (d0_cov) Require(d0_cov->rows() == ny && d0_cov->cols() == ny, "d0_cov must be n_y by n_y");

  const int n = nx + ny;
  ModelSpec out;
  out.n_x = n;
  out.n_y = ny;
  out.n_alpha = na + 3;
  out.N = spec.N;

  out.A = Extend(spec.A, 3, n, n, [&](const Matrix& m, bool offset) {
    Matrix big = Matrix::Zero(n, n);
    big.topLeftCorner(nx, nx) = m;
    if (offset) big.bottomRightCorner(ny, ny).setIdentity();
    return big;
  });
  out.b = Extend(spec.b, 3, n, 1, [&](const Matrix& m, bool) {
    Matrix big = Matrix::Zero(n, 1);
    big.topRows(nx) = m;
    return big;
  });
  out.C = Extend(spec.C, 3, ny, n, [&](const Matrix& m, bool offset) {
    Matrix big = Matrix::Zero(ny, n);
    big.leftCols(nx) = m;
    if (offset) big.rightCols(ny).setIdentity();
    return big;
  });

  std::vector<Matrix> q_basis(out.n_alpha + 1, Matrix::Zero(n, n));
  q_basis[na + 1].topLeftCorner(nx, nx) = q_x;
  q_basis[na + 2].bottomRightCorner(ny, ny) = q_d;
  out.Q = AffineMatrixFamily::TimeInvariant(std::move(q_basis));

  std::vector<Matrix> r_basis(out.n_alpha + 1, Matrix::Zero(ny, ny));
  r_basis[na + 3] = r;
  out.R = AffineMatrixFamily::TimeInvariant(std::move(r_basis));

  out.x0_mean = Vector::Zero(n);
  out.x0_mean.head(nx) = spec.x0_mean;
  out.x0_cov = Matrix::Zero(n, n);
  out.x0_cov.topLeftCorner(nx, nx) = spec.x0_cov;
  if (d0_cov) out.x0_cov.bottomRightCorner(ny, ny) = *d0_cov;

  const double inf = std::numeric_limits<double>::infinity();
  out.constraints = spec.constraints;
  auto extend_bound = [&](std::optional<Vector>& bound, double fill, double scale_fill) {
    Vector v = Vector::Constant(out.n_alpha, fill);
    if (bound) v.head(na) = *bound;
    v.tail(3).setConstant(scale_fill);
    bound = v;
  };
  // Noise scales stay strictly positive so S_k remains invertible.
  extend_bound(out.constraints.lower, -inf, 1e-6);
  extend_bound(out.constraints.upper, inf, inf);
  if (out.constraints.G.rows() > 0) {
    Matrix g(out.constraints.G.rows(), out.n_alpha);
    g.setZero();
    g.leftCols(na) = spec.constraints.G;
    out.constraints.G = g;
  }
  for (auto& c : out.constraints.convex) {
    ConvexResidual base = c;
    c.value = [base, na](const Vector& a) { return base.value(a.head(na)); };
    c.gradient = [base, na](const Vector& a) {
      Vector grad = Vector::Zero(a.size());
      grad.head(na) = base.gradient(a.head(na));
      return grad;
    };
  }
  out.param_names = spec.param_names;
  if (!out.param_names.empty() || na == 0) {
    out.param_names.resize(na);
    out.param_names.insert(out.param_names.end(), {"scale_Qx", "scale_Qd", "scale_R"});
  }
  out.Validate();
  return out;
}

}  // namespace lingauss
