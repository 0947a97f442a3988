#include "lingauss/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lingauss {

double QPObjective(const QPSubproblem& qp, const Vector& x) {
  return 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
}

double QPKKTResidual(const QPSubproblem& qp, const Vector& x, const Vector& multipliers) {
  Vector stationarity = qp.H * x + qp.g;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  if (qp.G.rows() > 0) {
    stationarity += qp.G.transpose() * multipliers;
    const Vector slack = qp.G * x - qp.h;
    primal = std::max(0.0, slack.maxCoeff());
    dual = std::max(0.0, -multipliers.minCoeff());
    complementarity = (multipliers.array() * slack.array()).abs().maxCoeff();
  }
  const double stat = stationarity.size() ? stationarity.cwiseAbs().maxCoeff() : 0.0;
  return std::max({stat, primal, dual, complementarity});
}

QPSolution SolveDenseQP(const QPSubproblem& qp, double feasibility_tol) {
  const int n = static_cast<int>(qp.g.size());
  const int m = static_cast<int>(qp.G.rows());
  if (qp.H.rows() != n || qp.H.cols() != n) throw std::invalid_argument("QP: H has wrong shape");
  if (m > 0 && (qp.G.cols() != n || qp.h.size() != m)) {
    throw std::invalid_argument("QP: constraint rows have wrong shape");
  }
  if (m > 0 && qp.h.minCoeff() < -feasibility_tol) {
    throw QPError("QP: the origin violates the linearized constraints");
  }

  QPSolution sol;
  Matrix H = 0.5 * (qp.H + qp.H.transpose());
  {
    const double max_diag = n > 0 ? H.diagonal().cwiseAbs().maxCoeff() : 0.0;
    Eigen::LDLT<Matrix> ldlt(H);
    const bool singular = n > 0 && (ldlt.info() != Eigen::Success || !(max_diag > 0.0) ||
                                    ldlt.vectorD().minCoeff() <= 1e-12 * max_diag);
    if (singular) {
      H.diagonal().array() += 1e-10 * std::max(1.0, max_diag);
      sol.regularized = true;
    }
  }

  Vector x = Vector::Zero(n);
  std::vector<int> working;
  Vector lambda_w;
  const int max_iter = 20 * std::max(1, m) + 2 * n;

  for (int iter = 0;; ++iter) {
    if (iter >= max_iter) {
      throw QPError("QP: active-set iteration limit (" + std::to_string(max_iter) + ") exceeded");
    }
    sol.iterations = iter + 1;
    const int w = static_cast<int>(working.size());
    // Null-space step: p = Z p_z with Z spanning {p | W p = 0}, so the
    // working rows stay exactly active however H is scaled.
    const Vector grad = H * x + qp.g;
    Matrix W(w, n);
    for (int j = 0; j < w; ++j) W.row(j) = qp.G.row(working[j]);
    Matrix Z = Matrix::Identity(n, n);
    if (w > 0) {
      Eigen::FullPivHouseholderQR<Matrix> qr(W.transpose());
      const Matrix Q = qr.matrixQ();
      Z = Q.rightCols(n - static_cast<int>(qr.rank()));
    }
    // Tolerances in gradient units, so they do not depend on how H is scaled.
    const double grad_scale = 1.0 + (n > 0 ? qp.g.cwiseAbs().maxCoeff() +
                                                 (H * x).cwiseAbs().maxCoeff()
                                           : 0.0);
    const Vector reduced = Z.transpose() * grad;
    Vector p = Vector::Zero(n);
    const bool stationary =
        reduced.size() == 0 || reduced.cwiseAbs().maxCoeff() <= 1e-13 * grad_scale;
    if (!stationary) p = Z * (Z.transpose() * H * Z).ldlt().solve(-reduced);
    // Multipliers at x + p: minimum-norm solution of Wᵀλ = −(H(x + p) + g).
    lambda_w = w > 0 ? Vector(W.transpose().completeOrthogonalDecomposition().solve(
                           -(grad + H * p)))
                     : Vector();

    if (!stationary) {
      double step = 1.0;
      int blocking = -1;
      for (int i = 0; i < m; ++i) {
        if (std::find(working.begin(), working.end(), i) != working.end()) continue;
        const double gp = qp.G.row(i).dot(p);
        if (gp <= 1e-14 * qp.G.row(i).norm() * p.norm()) continue;
        const double room = std::max(0.0, qp.h[i] - qp.G.row(i).dot(x));
        const double t = room / gp;
        if (t < step) {
          step = t;
          blocking = i;
        }
      }
      x += step * p;
      if (blocking >= 0) {
        working.push_back(blocking);
        continue;
      }
      // A full step solves the working-set problem and lambda_w holds its
      // multipliers, so re-solving would only chase roundoff.
    }
    // Stationary on the working set: drop the most negative multiplier.
    int drop = -1;
    double most_negative = -1e-12 * grad_scale;
    for (int j = 0; j < w; ++j) {
      if (lambda_w[j] < most_negative ||
          (lambda_w[j] == most_negative && drop >= 0 && working[j] < working[drop])) {
        most_negative = lambda_w[j];
        drop = j;
      }
    }
    if (drop < 0) break;
    working.erase(working.begin() + drop);
  }

  sol.x = x;
  sol.multipliers = Vector::Zero(m);
  for (size_t j = 0; j < working.size(); ++j) {
    sol.multipliers[working[j]] = std::max(0.0, lambda_w[static_cast<int>(j)]);
  }
  sol.active = working;
  std::sort(sol.active.begin(), sol.active.end());
  QPSubproblem regularized = qp;
  regularized.H = H;
  sol.kkt_residual = QPKKTResidual(regularized, sol.x, sol.multipliers);
  return sol;
}

}  // namespace lingauss
