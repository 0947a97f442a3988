// Seeded synthetic data: trajectories, input profiles and parameter draws.
//
// Every random quantity is drawn from a stream keyed by (seed, role, index),
// so a longer horizon extends a series instead of reshuffling it and results
// do not depend on evaluation order.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lingauss/kalman.hpp"

namespace lingauss {

/// SplitMix64 generator; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::uint64_t state_;
};

enum class StreamRole : std::uint64_t {
  kInitialState = 1,
  kProcessNoise = 2,
  kMeasurementNoise = 3,
  kInputs = 4,
  kTrueParams = 5,
};

/// Independent generator for (seed, role, index).
SplitMix64 KeyedStream(std::uint64_t seed, StreamRole role, std::uint64_t index);

/// Mixes extra words into a seed (e.g. trial index, horizon).
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// F with F Fᵀ = Σ for symmetric PSD Σ (columns of zero-variance directions
/// are zero). Throws NumericalError when Σ is not PSD.
Matrix PsdFactor(const Matrix& sigma);

struct NoiseSeeds {
  std::uint64_t state;        // x_0 and process noise
  std::uint64_t measurement;  // measurement noise
};

/// Draws x_0 ~ N(x̂_0, P_0), w_k ~ N(0, Q_k), v_k ~ N(0, R_k) and returns
/// y_k = C_k x_k + v_k with the true states and α attached.
MeasurementSeries SampleTrajectory(const ModelSpec& spec, const Vector& alpha,
                                   std::uint64_t seed);
MeasurementSeries SampleTrajectory(const ModelSpec& spec, const Vector& alpha,
                                   const NoiseSeeds& seeds);

struct InputChannelRange {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

/// Named per-step input channels, each of length N.
struct InputProfile {
  std::vector<std::string> names;
  std::vector<std::vector<double>> channels;

  int length() const { return channels.empty() ? 0 : static_cast<int>(channels[0].size()); }
  /// Throws std::invalid_argument for an unknown name.
  const std::vector<double>& channel(const std::string& name) const;
};

/// Piecewise-constant inputs: each channel holds one U(lower, upper) value per
/// block of `block` steps; the last block may be partial.
InputProfile GenPiecewiseInputs(std::uint64_t seed, int N,
                                const std::vector<InputChannelRange>& ranges, int block = 50);

/// θ⁰ ~ U(0, 200), q ~ U(0, 20).
std::vector<InputChannelRange> HeatTransferInputRanges();

/// Independent U(lower_i, upper_i) draws.
Vector SampleTrueParams(std::uint64_t seed, const Vector& lower, const Vector& upper);

}  // namespace lingauss
