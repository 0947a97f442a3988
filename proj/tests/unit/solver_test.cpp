#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lingauss/examples.hpp"
#include "lingauss/simulate.hpp"
#include "lingauss/solver.hpp"
#include "test_support.hpp"

namespace lingauss {
namespace {

using testing::RandomAlpha;
using testing::RandomSeries;
using testing::RandomSpec;

Vector V1(double x) { return Vector::Constant(1, x); }
Matrix M1(double x) { return Matrix::Constant(1, 1, x); }

// f(t) = (1 + t)² / (2 + t) along δe = δS = 1 from e = 1, S = 2.
TEST(Solver, QuadraticModelHandCase) {
  const MlQuadraticModel q(V1(1.0), M1(2.0));
  EXPECT_DOUBLE_EQ(q.value(), 0.5);
  EXPECT_DOUBLE_EQ(q.FirstDerivative(V1(1.0), M1(1.0)), 0.75);
  EXPECT_DOUBLE_EQ(q.SecondDerivative(V1(1.0), M1(1.0)), 0.25);
  auto f = [](double t) { return (1 + t) * (1 + t) / (2 + t); };
  const double h = 1e-4;
  EXPECT_NEAR((f(h) - f(-h)) / (2 * h), 0.75, 1e-8);
  EXPECT_NEAR((f(h) - 2 * f(0) + f(-h)) / (h * h), 0.25, 1e-6);
}

TEST(Solver, QuadraticModelNullDirection) {
  std::mt19937_64 rng(51);
  const Vector e = testing::RandomMatrix(rng, 2, 1);
  const Matrix S = testing::RandomPsd(rng, 2, 1.0, 0.5);
  const MlQuadraticModel q(e, S);
  const Matrix dS = testing::RandomPsd(rng, 2, 1.0, 0.0);
  const Vector de = dS * S.ldlt().solve(e);
  EXPECT_NEAR(q.SecondDerivative(de, dS), 0.0, 1e-12);
}

TEST(Solver, QuadraticModelFrozenCovariance) {
  std::mt19937_64 rng(52);
  const Vector e = testing::RandomMatrix(rng, 2, 1);
  const Matrix S = testing::RandomPsd(rng, 2, 1.0, 0.5);
  const Vector de = testing::RandomMatrix(rng, 2, 1);
  const MlQuadraticModel q(e, S);
  const Matrix M = S.inverse();
  const Matrix zero = Matrix::Zero(2, 2);
  EXPECT_NEAR(q.FirstDerivative(de, zero), 2 * de.dot(M * e), 1e-12);
  EXPECT_NEAR(q.SecondDerivative(de, zero), 2 * de.dot(M * de), 1e-12);
}

TEST(Solver, QuadraticModelFirstDerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(53);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + rep % 3;
    const Vector e = testing::RandomMatrix(rng, n, 1);
    const Matrix S = testing::RandomPsd(rng, n, 1.0, 0.5);
    const Vector de = testing::RandomMatrix(rng, n, 1);
    Matrix dS = testing::RandomMatrix(rng, n, n);
    dS = 0.5 * (dS + dS.transpose()).eval();
    auto f = [&](double t) {
      const Vector et = e + t * de;
      return et.dot((S + t * dS).ldlt().solve(et));
    };
    const double h = 1e-5;
    const MlQuadraticModel q(e, S);
    EXPECT_NEAR(q.FirstDerivative(de, dS), (f(h) - f(-h)) / (2 * h),
                1e-6 * std::max(1.0, std::abs(q.FirstDerivative(de, dS))));
    EXPECT_GE(q.SecondDerivative(de, dS), -1e-12);
  }
}

TEST(Solver, QuadraticModelRejectsIndefinite) {
  EXPECT_THROW(MlQuadraticModel(V1(1.0), M1(-1.0)), NumericalError);
}

TEST(Solver, BuildQPAmlIsGaussNewton) {
  std::mt19937_64 rng(54);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelSpec spec = RandomSpec(rng);
    const Vector a = RandomAlpha(rng, spec.n_alpha);
    const FilterTrace t = RunFilterWithSensitivities(spec, a, RandomSeries(rng, spec.N, spec.n_y));
    Matrix J((spec.N + 1) * spec.n_y, spec.n_alpha);
    Vector e(J.rows());
    for (int k = 0; k <= spec.N; ++k) {
      e.segment(k * spec.n_y, spec.n_y) = t.steps[k].e;
      for (int i = 0; i < spec.n_alpha; ++i)
        J.block(k * spec.n_y, i, spec.n_y, 1) = t.sensitivities[k].de[i];
    }
    const QPSubproblem qp = BuildQP(a, t, ObjectiveKind::kAML, spec.constraints);
    const Matrix H = 2 * J.transpose() * J;
    EXPECT_LT((qp.H - H).cwiseAbs().maxCoeff(), 1e-12 * (1 + H.cwiseAbs().maxCoeff()));
    EXPECT_LT((qp.g - 2 * J.transpose() * e).cwiseAbs().maxCoeff(),
              1e-12 * (1 + qp.g.cwiseAbs().maxCoeff()));
  }
}

TEST(Solver, BuildQPScalarAml) {
  const ModelSpec spec = BuildRandomWalk(30);
  const Vector a = V1(1.2);
  const FilterTrace t = RunFilterWithSensitivities(spec, a, SampleTrajectory(spec, a, 3));
  double H = 0, g = 0;
  for (size_t k = 0; k < t.steps.size(); ++k) {
    H += 2 * std::pow(t.sensitivities[k].de[0][0], 2);
    g += 2 * t.steps[k].e[0] * t.sensitivities[k].de[0][0];
  }
  const QPSubproblem qp = BuildQP(a, t, ObjectiveKind::kAML, spec.constraints);
  EXPECT_NEAR(qp.H(0, 0), H, 1e-10 * std::abs(H));
  EXPECT_NEAR(qp.g[0], g, 1e-10 * (1 + std::abs(g)));
}

TEST(Solver, BuildQPMlWithZeroInnovations) {
  const ModelSpec spec = BuildUnderdetermined(10);
  MeasurementSeries y;
  for (int k = 0; k <= 10; ++k) y.y.push_back(Vector::Zero(1));
  Vector a(2);
  a << 0.7, 1.3;
  const FilterTrace t = RunFilterWithSensitivities(spec, a, y);
  const QPSubproblem qp = BuildQP(a, t, ObjectiveKind::kML, spec.constraints);
  for (int i = 0; i < 2; ++i) {
    double tr = 0;
    for (size_t k = 0; k < t.steps.size(); ++k)
      tr += (t.steps[k].S_inv * t.sensitivities[k].dS[i]).trace();
    EXPECT_NEAR(qp.g[i], tr, 1e-12 * (1 + std::abs(tr)));
  }
}

TEST(Solver, BuildQPHessianPsdAndGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelSpec spec = RandomSpec(rng);
    const Vector a = RandomAlpha(rng, spec.n_alpha);
    const MeasurementSeries y = RandomSeries(rng, spec.N, spec.n_y);
    const FilterTrace t = RunFilterWithSensitivities(spec, a, y);
    for (ObjectiveKind kind : {ObjectiveKind::kML, ObjectiveKind::kAML}) {
      const QPSubproblem qp = BuildQP(a, t, kind, spec.constraints);
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(qp.H).eigenvalues().minCoeff(),
                -1e-10 * (1 + qp.H.norm()));
      auto f = [&](const Vector& x) { return ObjectiveValue(spec, x, y, kind); };
      for (int i = 0; i < spec.n_alpha; ++i) {
        const double fd = testing::CentralDifference(f, a, i, 1e-5);
        EXPECT_LT(std::abs(qp.g[i] - fd), 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(Solver, BuildQPRequiresSensitivities) {
  const ModelSpec spec = BuildRandomWalk(3);
  const FilterTrace t = RunFilter(spec, V1(1.0), SampleTrajectory(spec, V1(1.0), 1));
  EXPECT_THROW(BuildQP(V1(1.0), t, ObjectiveKind::kML, spec.constraints), std::invalid_argument);
}

TEST(Solver, LineSearchAcceptsNewtonStep) {
  auto phi = [](const Vector& a) { return a.squaredNorm(); };
  const LineSearchResult r = LineSearchUpdate(V1(1.0), V1(-1.0), 1.0, -2.0, phi, {});
  EXPECT_FALSE(r.stalled);
  EXPECT_EQ(r.step, 1.0);
  EXPECT_EQ(r.alpha[0], 0.0);
}

TEST(Solver, LineSearchStallsUphill) {
  auto phi = [](const Vector& a) { return a.squaredNorm(); };
  const LineSearchResult r = LineSearchUpdate(V1(1.0), V1(1.0), 1.0, 2.0, phi, {});
  EXPECT_TRUE(r.stalled);
  EXPECT_EQ(r.step, 0.0);
  EXPECT_EQ(r.alpha[0], 1.0);
}

TEST(Solver, LineSearchTreatsFailuresAsInfinite) {
  auto phi = [](const Vector& a) {
    if (a[0] < 0.4) throw NumericalError("bad");
    return (a[0] - 0.5) * (a[0] - 0.5);
  };
  // Full step lands at 0 (failure); half step at 0.5.
  const LineSearchResult r = LineSearchUpdate(V1(1.0), V1(-1.0), 0.25, -1.0, phi, {});
  EXPECT_FALSE(r.stalled);
  EXPECT_EQ(r.step, 0.5);
}

// x_{k+1} = a x_k + b, y = x, no noise: e_k ≡ 0 at the generating (a, b).
ModelSpec NoiselessAffineSpec(int N) {
  ModelSpec s;
  s.n_x = 1;
  s.n_y = 1;
  s.n_alpha = 2;
  s.N = N;
  s.A = AffineMatrixFamily::TimeInvariant({M1(0), M1(1), M1(0)});
  s.b = AffineMatrixFamily::TimeInvariant({M1(0), M1(0), M1(1)});
  s.C = AffineMatrixFamily::Constant(M1(1), 2);
  s.Q = AffineMatrixFamily::Constant(M1(1), 2);
  s.R = AffineMatrixFamily::Constant(M1(1), 2);
  s.x0_mean = V1(1.0);
  s.x0_cov = M1(0.0);
  s.constraints.lower = Vector::Constant(2, -2.0);
  s.constraints.upper = Vector::Constant(2, 2.0);
  s.Validate();
  return s;
}

TEST(Solver, NoiselessDataRecoversDynamics) {
  const ModelSpec spec = NoiselessAffineSpec(40);
  MeasurementSeries y;
  double x = 1.0;
  for (int k = 0; k <= 40; ++k) {
    y.y.push_back(V1(x));
    x = 0.9 * x + 0.5;
  }
  SolverConfig cfg;
  cfg.kind = ObjectiveKind::kAML;
  cfg.max_iter = 100;
  Vector a0(2);
  a0 << 0.5, 0.0;
  const EstimationResult r = Estimate(spec, y, cfg, a0);
  EXPECT_FALSE(r.failed()) << r.message;
  EXPECT_NEAR(r.alpha_hat[0], 0.9, 1e-6);
  EXPECT_NEAR(r.alpha_hat[1], 0.5, 1e-6);
}

TEST(Solver, RandomWalkMlEstimateNearTruth) {
  const ModelSpec spec = BuildRandomWalk(1000);
  const MeasurementSeries y = SampleTrajectory(spec, V1(1.0), 7);
  SolverConfig cfg;
  const EstimationResult sqp = Estimate(spec, y, cfg, V1(0.5));
  EXPECT_NEAR(sqp.alpha_hat[0], 1.0, 0.15);
  cfg.grid_search = true;
  const EstimationResult grid = Estimate(spec, y, cfg, V1(0.5));
  EXPECT_NEAR(grid.alpha_hat[0], 1.0, 0.15);
  // Both find the same local minimum.
  EXPECT_NEAR(grid.alpha_hat[0], sqp.alpha_hat[0], 1e-4);
  EXPECT_LE(grid.objective, sqp.objective + 1e-6);
}

TEST(Solver, IteratesFeasibleAndMeritNonIncreasing) {
  const ModelSpec spec = BuildNamedModel("heat_transfer", 300, 4);
  Vector truth(5);
  truth << 0.3, 0.6, 0.2, 0.8, 0.4;
  const MeasurementSeries y = SampleTrajectory(spec, truth, 8);
  for (ObjectiveKind kind : {ObjectiveKind::kML, ObjectiveKind::kAML}) {
    SolverConfig cfg;
    cfg.kind = kind;
    cfg.fixed_iterations = true;
    const Vector a0 = Vector::Constant(5, 0.5);
    const EstimationResult r = Estimate(spec, y, cfg, a0);
    ASSERT_FALSE(r.failed()) << r.message;
    EXPECT_LE(r.objective, ObjectiveValue(spec, a0, y, kind));
    EXPECT_LE(ConstraintViolation(spec.constraints, r.alpha_hat), 1e-8);
    for (size_t i = 0; i < r.iterates.size(); ++i) {
      EXPECT_LE(ConstraintViolation(spec.constraints, r.iterates[i].alpha), 1e-8);
      if (i > 0) {
        // Merits compared at the later penalty, which only grows.
        const double p = r.iterates[i].penalty;
        const double prev = r.iterates[i - 1].objective +
                            p * ConstraintViolation(spec.constraints, r.iterates[i - 1].alpha);
        EXPECT_LE(r.iterates[i].merit, prev + 1e-9 * std::abs(prev));
      }
    }
  }
}

TEST(Solver, ConvexConstraintHandledByMerit) {
  // min (α − 2)² s.t. α² − 1 ≤ 0, written as a one-parameter spec through
  // the AML objective of a deterministic observation y_k = 2.
  ModelSpec spec;
  spec.n_x = 1;
  spec.n_y = 1;
  spec.n_alpha = 1;
  spec.N = 0;
  spec.A = AffineMatrixFamily::Constant(M1(1), 1);
  spec.b = AffineMatrixFamily::Constant(M1(0), 1);
  spec.Q = AffineMatrixFamily::Constant(M1(1), 1);
  spec.C = AffineMatrixFamily::TimeInvariant({M1(0), M1(1)});
  spec.R = AffineMatrixFamily::Constant(M1(1), 1);
  spec.x0_mean = V1(1.0);
  spec.x0_cov = M1(0.0);
  spec.constraints.convex.push_back(
      {[](const Vector& a) { return a.squaredNorm() - 1.0; },
       [](const Vector& a) { return Vector(2 * a); }});
  spec.Validate();
  MeasurementSeries y;
  y.y.push_back(V1(2.0));
  SolverConfig cfg;
  cfg.kind = ObjectiveKind::kAML;
  cfg.max_iter = 100;
  const EstimationResult r = Estimate(spec, y, cfg, V1(0.0));
  EXPECT_FALSE(r.failed());
  EXPECT_NEAR(r.alpha_hat[0], 1.0, 1e-6);
  EXPECT_LE(ConstraintViolation(spec.constraints, r.alpha_hat), 1e-8);
}

TEST(Solver, UnderdeterminedExercisesRegularization) {
  const ModelSpec spec = BuildUnderdetermined(200);
  Vector truth(2);
  truth << 1.0, 1.0;
  const MeasurementSeries y = SampleTrajectory(spec, truth, 12);
  SolverConfig cfg;
  const EstimationResult r = Estimate(spec, y, cfg, truth);
  EXPECT_FALSE(r.failed()) << r.message;
  EXPECT_TRUE(r.hessian_regularized);
  // The estimate stays on a level set of the identifiable α₁²α₂.
  const double a = ObjectiveValue(spec, r.alpha_hat, y, ObjectiveKind::kML);
  Vector moved(2);
  moved << 2 * r.alpha_hat[0], r.alpha_hat[1] / 4;
  EXPECT_NEAR(ObjectiveValue(spec, moved, y, ObjectiveKind::kML), a, 1e-8 * std::abs(a));
}

TEST(Solver, EqualityPinFixesAmlScale) {
  ModelSpec spec = BuildUnderdetermined(100);
  Vector row(2);
  row << 0.0, 1.0;
  spec.constraints.AddEqualityPin(row, 1.0);
  Vector truth(2);
  truth << 1.5, 1.0;
  const MeasurementSeries y = SampleTrajectory(spec, truth, 5);
  SolverConfig cfg;
  Vector a0(2);
  a0 << 0.5, 1.0;
  const EstimationResult r = Estimate(spec, y, cfg, a0);
  EXPECT_FALSE(r.failed()) << r.message;
  EXPECT_NEAR(r.alpha_hat[1], 1.0, 1e-9);
}

TEST(Solver, InfeasibleStartRejected) {
  const ModelSpec spec = BuildRandomWalk(10);
  EXPECT_THROW(Estimate(spec, SampleTrajectory(spec, V1(1.0), 1), {}, V1(-1.0)),
               std::invalid_argument);
}

TEST(Solver, FdCheckRecordsGradientError) {
  const ModelSpec spec = BuildRandomWalk(50);
  const MeasurementSeries y = SampleTrajectory(spec, V1(1.0), 2);
  SolverConfig cfg;
  cfg.fd_check = true;
  cfg.max_iter = 3;
  const EstimationResult r = Estimate(spec, y, cfg, V1(0.5));
  for (const auto& it : r.iterates) {
    EXPECT_GE(it.fd_gradient_error, 0.0);
    EXPECT_LE(it.fd_gradient_error, 1e-6);
  }
}

TEST(Solver, ConfigValidation) {
  SolverConfig cfg;
  cfg.max_iter = 0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = {};
  cfg.line_search.backtrack = 1.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lingauss
