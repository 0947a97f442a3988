// Finite-difference checks of filter sensitivities and objective gradients.
#pragma once

#include <string>
#include <vector>

#include "lingauss/solver.hpp"

namespace lingauss {

struct DerivativeCheckItem {
  std::string name;   // e.g. "dS", "gradient_ml"
  int param = -1;     // -1 for whole-vector checks
  double rel_error = 0.0;
};

struct DerivativeCheck {
  std::vector<DerivativeCheckItem> items;
  double max_rel_error = 0.0;
  bool passed(double tol = 1e-6) const { return max_rel_error <= tol; }
};

/// Compares the ML and A-ML gradients, both from the objective and from
/// BuildQP, with central differences of step `step`·max(1, |α_i|), and the
/// forward sensitivities (∂e_k, ∂S_k) with a five-point central stencil of
/// step `sensitivity_step`·max(1, |α_i|). Errors are ∞-norm relative.
DerivativeCheck CheckDerivatives(const ModelSpec& spec, const Vector& alpha,
                                 const MeasurementSeries& data, double step = 1e-5,
                                 double sensitivity_step = 1e-3);

}  // namespace lingauss
