// Model instances: a scalar random walk observed through an unknown gain, an
// underdetermined variant of it, and a five-state heat-transfer process.
#pragma once

#include "lingauss/model.hpp"
#include "lingauss/simulate.hpp"

namespace lingauss {

/// x_{k+1} = x_k + w_k, y_k = α x_k + v_k, w, v ~ N(0, 1), x_0 = 0, α ≥ 0.
ModelSpec BuildRandomWalk(int N);

/// x_{k+1} = x_k + w_k, y_k = α₁ x_k + v_k, w ~ N(0, α₂), v ~ N(0, 1),
/// x_0 = 0. Only α₁²α₂ (the signal variance scale) is identifiable, so
/// (cα₁, α₂/c²) give the same likelihood. α₂ ≥ `q_floor`.
ModelSpec BuildUnderdetermined(int N, double q_floor = 1e-6);

/// Parameters α = (a, b, c, s_Q, s_ext); state (θ¹, θ², θ³, θ⁴, θ_ext);
/// outputs θ² and θ⁴. With ã_k = a + b q_k and γ_k = 1 − ã_k − c:
///
///   A_k = 0.05·[γ−a  a    0    0  c]     b_k = 0.05·[ã_k θ⁰_k, 0, 0, 0, 0]ᵀ
///              [ã    γ−a  a    0  c]     Q   = diag(0.1 s_Q ×4, 4 s_ext)
///              [0    ã    γ−a  a  c]     R   = I₂
///              [0    0    ã    γ  c]
///              [0    0    0    0  0]
///
/// The horizon is the input length. The 0.05 factor covers the whole matrix
/// and the last row is zero, so θ_ext is white noise rather than a random
/// walk. 𝒜 = [0, 1]⁵ with the two noise scales floored at `noise_floor`.
/// Initial belief x̂_0 = 0, P_0 = `p0_scale`·I.
ModelSpec BuildHeatTransfer(const InputProfile& inputs, double noise_floor = 1e-6,
                            double p0_scale = 100.0);

/// Builds any of the above by name ("random_walk", "underdetermined",
/// "heat_transfer"). heat_transfer draws its inputs from `input_seed`.
ModelSpec BuildNamedModel(const std::string& name, int N, std::uint64_t input_seed = 0);

}  // namespace lingauss
