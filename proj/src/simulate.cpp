#include "lingauss/simulate.hpp"

#include <cmath>
#include <random>

namespace lingauss {

SplitMix64::result_type SplitMix64::operator()() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  SplitMix64 mix(seed);
  std::uint64_t h = mix();
  h ^= SplitMix64(a + 0x632be59bd9b4e019ULL)();
  h = SplitMix64(h)();
  h ^= SplitMix64(b + 0x8cb92ba72f3d8dd7ULL)();
  return SplitMix64(h)();
}

SplitMix64 KeyedStream(std::uint64_t seed, StreamRole role, std::uint64_t index) {
  return SplitMix64(DeriveSeed(seed, static_cast<std::uint64_t>(role), index));
}

Matrix PsdFactor(const Matrix& sigma) {
  const int n = static_cast<int>(sigma.rows());
  if (sigma.cols() != n) throw std::invalid_argument("covariance must be square");
  const Matrix s = 0.5 * (sigma + sigma.transpose());
  const double max_diag = n > 0 ? s.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double tol = 1e-14 * std::max(max_diag, 1e-300);
  Matrix L = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double pivot = s(j, j) - L.row(j).head(j).squaredNorm();
    if (pivot < -1e-10 * std::max(max_diag, 1.0)) {
      throw NumericalError("covariance is not positive semi-definite");
    }
    if (pivot <= tol) {
      // Zero-variance direction: the remaining column must vanish too.
      for (int i = j + 1; i < n; ++i) {
        const double r = s(i, j) - L.row(i).head(j).dot(L.row(j).head(j));
        if (std::abs(r) > 1e-8 * std::max(max_diag, 1.0)) {
          throw NumericalError("covariance is not positive semi-definite");
        }
      }
      continue;
    }
    const double d = std::sqrt(pivot);
    L(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      L(i, j) = (s(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / d;
    }
  }
  return L;
}

namespace {

Vector StandardNormals(SplitMix64 gen, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (int i = 0; i < n; ++i) z[i] = normal(gen);
  return z;
}

}  // namespace

MeasurementSeries SampleTrajectory(const ModelSpec& spec, const Vector& alpha,
                                   std::uint64_t seed) {
  MeasurementSeries out = SampleTrajectory(spec, alpha, NoiseSeeds{seed, seed});
  out.seed = seed;
  return out;
}

MeasurementSeries SampleTrajectory(const ModelSpec& spec, const Vector& alpha,
                                   const NoiseSeeds& seeds) {
  spec.Validate();
  if (alpha.size() != spec.n_alpha) throw std::invalid_argument("alpha has wrong length");
  MeasurementSeries out;
  out.true_alpha = alpha;
  out.y.reserve(spec.N + 1);
  out.true_states.reserve(spec.N + 1);

  Vector x = spec.x0_mean +
             PsdFactor(spec.x0_cov) *
                 StandardNormals(KeyedStream(seeds.state, StreamRole::kInitialState, 0), spec.n_x);
  // Time-invariant noise covariances are factored once.
  Matrix q_factor, r_factor;
  for (int k = 0; k <= spec.N; ++k) {
    const ModelMatrices m = EvaluateMatrices(spec, alpha, k);
    if (k == 0 || spec.R.time_varying()) r_factor = PsdFactor(m.R);
    const Vector v =
        r_factor *
        StandardNormals(KeyedStream(seeds.measurement, StreamRole::kMeasurementNoise, k),
                        spec.n_y);
    out.y.push_back(m.C * x + v);
    out.true_states.push_back(x);
    if (k == spec.N) break;
    if (k == 0 || spec.Q.time_varying()) q_factor = PsdFactor(m.Q);
    const Vector w =
        q_factor *
        StandardNormals(KeyedStream(seeds.state, StreamRole::kProcessNoise, k), spec.n_x);
    x = m.A * x + m.b + w;
  }
  return out;
}

const std::vector<double>& InputProfile::channel(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return channels[i];
  }
  throw std::invalid_argument("input profile has no channel '" + name + "'");
}

InputProfile GenPiecewiseInputs(std::uint64_t seed, int N,
                                const std::vector<InputChannelRange>& ranges, int block) {
  if (N < 1) throw std::invalid_argument("input profile needs N >= 1");
  if (block < 1) throw std::invalid_argument("block length must be positive");
  InputProfile profile;
  const int blocks = (N + block - 1) / block;
  for (size_t c = 0; c < ranges.size(); ++c) {
    const auto& r = ranges[c];
    if (!(r.upper >= r.lower)) throw std::invalid_argument("input range is inverted");
    profile.names.push_back(r.name);
    std::vector<double> values(N);
    for (int j = 0; j < blocks; ++j) {
      SplitMix64 gen = KeyedStream(DeriveSeed(seed, c), StreamRole::kInputs, j);
      std::uniform_real_distribution<double> uniform(r.lower, r.upper);
      const double v = r.upper > r.lower ? uniform(gen) : r.lower;
      for (int k = j * block; k < std::min(N, (j + 1) * block); ++k) values[k] = v;
    }
    profile.channels.push_back(std::move(values));
  }
  return profile;
}

std::vector<InputChannelRange> HeatTransferInputRanges() {
  return {{"theta0", 0.0, 200.0}, {"q", 0.0, 20.0}};
}

Vector SampleTrueParams(std::uint64_t seed, const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw std::invalid_argument("range lengths differ");
  Vector alpha(lower.size());
  for (int i = 0; i < lower.size(); ++i) {
    if (!(upper[i] >= lower[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw std::invalid_argument("parameter range must be finite and ordered");
    }
    if (upper[i] == lower[i]) {
      alpha[i] = lower[i];
      continue;
    }
    SplitMix64 gen = KeyedStream(seed, StreamRole::kTrueParams, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> uniform(lower[i], upper[i]);
    alpha[i] = uniform(gen);
  }
  return alpha;
}

}  // namespace lingauss
