#include "lingauss/examples.hpp"

#include <limits>

namespace lingauss {

namespace {

Matrix Scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

ModelSpec BuildRandomWalk(int N) {
  if (N < 0) throw std::invalid_argument("random walk needs N >= 0");
  ModelSpec spec;
  spec.n_x = spec.n_y = spec.n_alpha = 1;
  spec.N = N;
  spec.A = AffineMatrixFamily::Constant(Scalar(1.0), 1);
  spec.b = AffineMatrixFamily::Constant(Scalar(0.0), 1);
  spec.C = AffineMatrixFamily::TimeInvariant({Scalar(0.0), Scalar(1.0)});
  spec.Q = AffineMatrixFamily::Constant(Scalar(1.0), 1);
  spec.R = AffineMatrixFamily::Constant(Scalar(1.0), 1);
  spec.x0_mean = Vector::Zero(1);
  spec.x0_cov = Matrix::Zero(1, 1);
  spec.constraints.lower = Vector::Zero(1);
  spec.param_names = {"alpha"};
  spec.Validate();
  return spec;
}

ModelSpec BuildUnderdetermined(int N, double q_floor) {
  if (N < 1) throw std::invalid_argument("underdetermined model needs N >= 1");
  if (!(q_floor > 0.0)) throw std::invalid_argument("q_floor must be positive");
  ModelSpec spec;
  spec.n_x = spec.n_y = 1;
  spec.n_alpha = 2;
  spec.N = N;
  spec.A = AffineMatrixFamily::Constant(Scalar(1.0), 2);
  spec.b = AffineMatrixFamily::Constant(Scalar(0.0), 2);
  spec.C = AffineMatrixFamily::TimeInvariant({Scalar(0.0), Scalar(1.0), Scalar(0.0)});
  spec.Q = AffineMatrixFamily::TimeInvariant({Scalar(0.0), Scalar(0.0), Scalar(1.0)});
  spec.R = AffineMatrixFamily::Constant(Scalar(1.0), 2);
  spec.x0_mean = Vector::Zero(1);
  spec.x0_cov = Matrix::Zero(1, 1);
  const double inf = std::numeric_limits<double>::infinity();
  spec.constraints.lower = Vector(2);
  *spec.constraints.lower << -inf, q_floor;
  spec.param_names = {"gain", "process_variance"};
  spec.Validate();
  return spec;
}

ModelSpec BuildHeatTransfer(const InputProfile& inputs, double noise_floor, double p0_scale) {
  const std::vector<double>& theta0 = inputs.channel("theta0");
  const std::vector<double>& q = inputs.channel("q");
  const int N = static_cast<int>(theta0.size());
  if (N < 1 || static_cast<int>(q.size()) != N) {
    throw std::invalid_argument("heat-transfer inputs must be non-empty and of equal length");
  }
  constexpr int kNx = 5;
  constexpr int kParams = 5;
  constexpr double kScale = 0.05;

  // Coefficient patterns of A in a, q·b and c.
  Matrix a_pattern = Matrix::Zero(kNx, kNx);
  Matrix b_pattern = Matrix::Zero(kNx, kNx);
  Matrix c_pattern = Matrix::Zero(kNx, kNx);
  for (int r = 0; r < 4; ++r) {
    // γ − a on rows 0..2 and γ on row 3; ã on the subdiagonal, a above.
    a_pattern(r, r) = r < 3 ? -2.0 : -1.0;
    b_pattern(r, r) = -1.0;
    if (r > 0) {
      a_pattern(r, r - 1) = 1.0;
      b_pattern(r, r - 1) = 1.0;
    }
    if (r < 3) a_pattern(r, r + 1) = 1.0;
    c_pattern(r, r) = -1.0;
    c_pattern(r, 4) = 1.0;
  }
  Matrix a_offset = Matrix::Zero(kNx, kNx);
  a_offset.diagonal().head(4).setOnes();

  std::vector<std::vector<Matrix>> A_basis, b_basis;
  A_basis.reserve(N);
  b_basis.reserve(N);
  for (int k = 0; k < N; ++k) {
    std::vector<Matrix> A_k(kParams + 1, Matrix::Zero(kNx, kNx));
    A_k[0] = kScale * a_offset;
    A_k[1] = kScale * a_pattern;
    A_k[2] = kScale * q[k] * b_pattern;
    A_k[3] = kScale * c_pattern;
    A_basis.push_back(std::move(A_k));

    std::vector<Matrix> b_k(kParams + 1, Matrix::Zero(kNx, 1));
    b_k[1](0, 0) = kScale * theta0[k];
    b_k[2](0, 0) = kScale * q[k] * theta0[k];
    b_basis.push_back(std::move(b_k));
  }

  ModelSpec spec;
  spec.n_x = kNx;
  spec.n_y = 2;
  spec.n_alpha = kParams;
  spec.N = N;
  spec.A = AffineMatrixFamily(kNx, kNx, true, std::move(A_basis));
  spec.b = AffineMatrixFamily(kNx, 1, true, std::move(b_basis));

  Matrix C = Matrix::Zero(2, kNx);
  C(0, 1) = 1.0;
  C(1, 3) = 1.0;
  spec.C = AffineMatrixFamily::Constant(C, kParams);

  std::vector<Matrix> q_basis(kParams + 1, Matrix::Zero(kNx, kNx));
  q_basis[4].diagonal().head(4).setConstant(0.1);
  q_basis[5](4, 4) = 4.0;
  spec.Q = AffineMatrixFamily::TimeInvariant(std::move(q_basis));
  spec.R = AffineMatrixFamily::Constant(Matrix::Identity(2, 2), kParams);

  spec.x0_mean = Vector::Zero(kNx);
  spec.x0_cov = p0_scale * Matrix::Identity(kNx, kNx);
  spec.constraints.lower = Vector::Zero(kParams);
  (*spec.constraints.lower)[3] = noise_floor;
  (*spec.constraints.lower)[4] = noise_floor;
  spec.constraints.upper = Vector::Ones(kParams);
  spec.param_names = {"a", "b", "c", "s_Q", "s_ext"};
  spec.Validate();
  return spec;
}

ModelSpec BuildNamedModel(const std::string& name, int N, std::uint64_t input_seed) {
  if (name == "random_walk") return BuildRandomWalk(N);
  if (name == "underdetermined") return BuildUnderdetermined(N);
  if (name == "heat_transfer") {
    return BuildHeatTransfer(GenPiecewiseInputs(input_seed, N, HeatTransferInputRanges()));
  }
  throw std::invalid_argument("unknown model builder '" + name + "'");
}

}  // namespace lingauss
