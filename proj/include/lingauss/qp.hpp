// Small dense convex QP solver (primal active set).
#pragma once

#include "lingauss/model.hpp"

namespace lingauss {

/// min ½ δᵀHδ + gᵀδ  s.t.  G δ ≤ h
struct QPSubproblem {
  Matrix H;
  Vector g;
  Matrix G;  // may have zero rows
  Vector h;
};

struct QPSolution {
  Vector x;
  Vector multipliers;  // one per inequality row, ≥ 0
  std::vector<int> active;
  int iterations = 0;
  bool regularized = false;
  double kkt_residual = 0.0;
};

class QPError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Primal active-set method started from δ = 0, which must be feasible
/// (h ≥ 0 up to `feasibility_tol`). A 1e-10·max(1, max|H_ii|) ridge is added
/// when H is numerically singular. Ties in the choice of blocking or dropped
/// constraints go to the lowest index. Throws QPError after 20·max(1, rows)
/// iterations.
QPSolution SolveDenseQP(const QPSubproblem& qp, double feasibility_tol = 1e-9);

/// max of stationarity, primal infeasibility, dual infeasibility and
/// complementarity for a candidate (x, λ).
double QPKKTResidual(const QPSubproblem& qp, const Vector& x, const Vector& multipliers);

double QPObjective(const QPSubproblem& qp, const Vector& x);

}  // namespace lingauss
