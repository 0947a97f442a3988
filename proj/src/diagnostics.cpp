#include "lingauss/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace lingauss {

namespace {

double RelError(double diff_norm, double ref_norm, double floor) {
  return diff_norm / std::max(ref_norm, floor);
}

}  // namespace

DerivativeCheck CheckDerivatives(const ModelSpec& spec, const Vector& alpha,
                                 const MeasurementSeries& data, double step,
                                 double sensitivity_step) {
  DerivativeCheck out;
  const FilterTrace trace = RunFilterWithSensitivities(spec, alpha, data);
  const int na = spec.n_alpha;
  auto add = [&](std::string name, int param, double err) {
    out.items.push_back({std::move(name), param, err});
    out.max_rel_error = std::max(out.max_rel_error, err);
  };

  for (int i = 0; i < na; ++i) {
    // Five-point stencil: O(h⁴) truncation allows a step large enough that
    // roundoff in e_k (which can be far larger than ∂e_k) stays negligible.
    const double h = sensitivity_step * std::max(1.0, std::abs(alpha[i]));
    auto shifted = [&](double t) {
      Vector a = alpha;
      a[i] += t;
      return RunFilter(spec, a, data);
    };
    const FilterTrace p1 = shifted(h), m1 = shifted(-h), p2 = shifted(2 * h), m2 = shifted(-2 * h);
    double de_diff = 0.0, de_ref = 0.0, dS_diff = 0.0, dS_ref = 0.0;
    for (size_t k = 0; k < trace.steps.size(); ++k) {
      const Vector de_fd = (8.0 * (p1.steps[k].e - m1.steps[k].e) -
                            (p2.steps[k].e - m2.steps[k].e)) / (12.0 * h);
      const Matrix dS_fd = (8.0 * (p1.steps[k].S - m1.steps[k].S) -
                            (p2.steps[k].S - m2.steps[k].S)) / (12.0 * h);
      const auto& sens = trace.sensitivities[k];
      de_diff = std::max(de_diff, (sens.de[i] - de_fd).cwiseAbs().maxCoeff());
      de_ref = std::max(de_ref, de_fd.cwiseAbs().maxCoeff());
      dS_diff = std::max(dS_diff, (sens.dS[i] - dS_fd).cwiseAbs().maxCoeff());
      dS_ref = std::max(dS_ref, dS_fd.cwiseAbs().maxCoeff());
    }
    add("de", i, RelError(de_diff, de_ref, 1e-8));
    add("dS", i, RelError(dS_diff, dS_ref, 1e-8));
  }

  for (ObjectiveKind kind : {ObjectiveKind::kML, ObjectiveKind::kAML}) {
    const ObjectiveEval eval = EvalObjective(trace, kind, true);
    Vector fd(na);
    for (int i = 0; i < na; ++i) {
      const double h = step * std::max(1.0, std::abs(alpha[i]));
      Vector plus = alpha, minus = alpha;
      plus[i] += h;
      minus[i] -= h;
      fd[i] = (ObjectiveValue(spec, plus, data, kind) - ObjectiveValue(spec, minus, data, kind)) /
              (2.0 * h);
    }
    const double floor = 1e-8 * (1.0 + std::abs(eval.value));
    const double ref = na ? fd.cwiseAbs().maxCoeff() : 0.0;
    const std::string tag(ObjectiveName(kind));
    add("gradient_" + tag, -1,
        na ? RelError((*eval.gradient - fd).cwiseAbs().maxCoeff(), ref, floor) : 0.0);
    const QPSubproblem qp = BuildQP(alpha, trace, kind, ConstraintSet{});
    add("qp_gradient_" + tag, -1,
        na ? RelError((qp.g - fd).cwiseAbs().maxCoeff(), ref, floor) : 0.0);
  }
  return out;
}

}  // namespace lingauss
