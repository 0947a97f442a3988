#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lingauss/examples.hpp"
#include "lingauss/kalman.hpp"
#include "lingauss/simulate.hpp"

namespace lingauss {
namespace {

InputProfile ConstantInputs(int N, double theta0, double q) {
  InputProfile p;
  p.names = {"theta0", "q"};
  p.channels = {std::vector<double>(N, theta0), std::vector<double>(N, q)};
  return p;
}

// Heat-transfer matrices written out entry by entry.
Matrix DirectHeatA(const Vector& al, double q) {
  const double a = al[0], b = al[1], c = al[2];
  const double at = a + b * q, g = 1.0 - at - c;
  Matrix A(5, 5);
  A << g - a, a, 0, 0, c,  //
      at, g - a, a, 0, c,  //
      0, at, g - a, a, c,  //
      0, 0, at, g, c,      //
      0, 0, 0, 0, 0;
  return 0.05 * A;
}

TEST(Examples, HeatFirstRowHandCase) {
  const ModelSpec spec = BuildHeatTransfer(ConstantInputs(3, 0.0, 0.0));
  Vector a(5);
  a << 1, 0, 0, 0.5, 0.5;
  Vector row(5);
  row << -1, 1, 0, 0, 0;
  EXPECT_LT((spec.A.Evaluate(0, a).row(0).transpose() - 0.05 * row).norm(), 1e-15);
}

TEST(Examples, HeatInputHandCase) {
  const ModelSpec spec = BuildHeatTransfer(ConstantInputs(2, 200.0, 7.0));
  Vector a(5);
  a << 1, 0, 0.3, 0.5, 0.5;
  EXPECT_NEAR(spec.b.Evaluate(1, a)(0, 0), 10.0, 1e-12);
  EXPECT_EQ(spec.b.Evaluate(1, a).bottomRows(4).norm(), 0.0);
}

TEST(Examples, HeatZeroParamsHandCase) {
  const ModelSpec spec = BuildHeatTransfer(ConstantInputs(2, 50.0, 3.0));
  Vector a(5);
  a << 0, 0, 0, 0.2, 0.9;
  Vector d(5);
  d << 1, 1, 1, 1, 0;
  EXPECT_LT((spec.A.Evaluate(1, a) - 0.05 * Matrix(d.asDiagonal())).norm(), 1e-15);
}

TEST(Examples, HeatMatchesDirectSubstitution) {
  const InputProfile inputs = GenPiecewiseInputs(3, 130, HeatTransferInputRanges());
  const ModelSpec spec = BuildHeatTransfer(inputs);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector a(5);
    for (int i = 0; i < 5; ++i) a[i] = u(rng);
    const int k = static_cast<int>(rng() % 130);
    const double q = inputs.channel("q")[k], th = inputs.channel("theta0")[k];
    EXPECT_LT((spec.A.Evaluate(k, a) - DirectHeatA(a, q)).norm(), 1e-13);
    Vector b = Vector::Zero(5);
    b[0] = 0.05 * (a[0] + a[1] * q) * th;
    EXPECT_LT((Vector(spec.b.Evaluate(k, a)) - b).norm(), 1e-12);
    Vector qd(5);
    qd << 0.1 * a[3], 0.1 * a[3], 0.1 * a[3], 0.1 * a[3], 4.0 * a[4];
    EXPECT_LT((spec.Q.Evaluate(k, a) - Matrix(qd.asDiagonal())).norm(), 1e-15);
    Matrix C = Matrix::Zero(2, 5);
    C(0, 1) = C(1, 3) = 1.0;
    EXPECT_EQ(spec.C.Evaluate(k, a), C);
    EXPECT_EQ(spec.R.Evaluate(k, a), Matrix::Identity(2, 2));
  }
  Vector dq(5);
  dq << 0.1, 0.1, 0.1, 0.1, 0;
  EXPECT_EQ(spec.Q.Derivative(0, 3), Matrix(dq.asDiagonal()));
  EXPECT_EQ(spec.x0_cov, 100.0 * Matrix::Identity(5, 5));
}

TEST(Examples, HeatFeasibility) {
  const ModelSpec spec = BuildHeatTransfer(ConstantInputs(4, 10.0, 1.0));
  EXPECT_TRUE(ValidateParameters(spec, Vector::Constant(5, 0.5)).ok());
  Vector a = Vector::Constant(5, 0.5);
  a[3] = 0.0;
  const ValidationReport r = ValidateParameters(spec, a);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.q_positive_definite);
  EXPECT_EQ(r.first_bad_q_step, 0);
}

TEST(Examples, RandomWalkMatrices) {
  const ModelSpec spec = BuildRandomWalk(10);
  const Vector a = Vector::Constant(1, 1.7);
  EXPECT_EQ(spec.C.Evaluate(4, a)(0, 0), 1.7);
  EXPECT_EQ(spec.A.Evaluate(4, a)(0, 0), 1.0);
  EXPECT_EQ(spec.Q.Evaluate(4, a)(0, 0), 1.0);
  EXPECT_FALSE(ValidateParameters(spec, Vector::Constant(1, -0.1)).feasible);
}

TEST(Examples, UnderdeterminedScaleInvariance) {
  const ModelSpec spec = BuildUnderdetermined(60);
  Vector t(2);
  t << 1.0, 1.0;
  const MeasurementSeries y = SampleTrajectory(spec, t, 21);
  const double base = StackedLogLikelihood(spec, t, y);
  for (double c : {0.5, 2.0, 3.0}) {
    Vector s(2);
    s << c, 1.0 / (c * c);
    EXPECT_NEAR(StackedLogLikelihood(spec, s, y), base, 1e-9 * std::abs(base)) << c;
  }
  Vector q0(2);
  q0 << 1.0, 0.0;
  const ValidationReport r = ValidateParameters(spec, q0);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.q_positive_definite);
}

TEST(Examples, NamedBuilders) {
  EXPECT_EQ(BuildNamedModel("random_walk", 7).N, 7);
  EXPECT_EQ(BuildNamedModel("underdetermined", 7).n_alpha, 2);
  const ModelSpec h = BuildNamedModel("heat_transfer", 60, 3);
  EXPECT_EQ(h.N, 60);
  EXPECT_EQ(h.n_x, 5);
  EXPECT_THROW(BuildNamedModel("pendulum", 5), std::invalid_argument);
}

}  // namespace
}  // namespace lingauss
