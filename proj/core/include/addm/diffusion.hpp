#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "addm/nets.hpp"
#include "addm/schedule.hpp"
#include "addm/tensor.hpp"

namespace addm {

/// Scalars of one reverse step, precomputed in double and rounded to float so
/// every caller applies bit-identical arithmetic.
struct ReverseCoeffs {
  float inv_sqrt_alpha;  // 1 / sqrt(alpha_t)
  float eps_coeff;       // beta_t / sqrt(1 - alpha_bar_t)
  float sigma;           // per SigmaMode
};
ReverseCoeffs reverse_coeffs(const NoiseSchedule& schedule, int t, SigmaMode mode);

/// One forward (noising) step: sqrt(1-beta_t) * x_prev + sqrt(beta_t) * eps.
Tensor forward_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& schedule);

/// Closed-form marginal: sqrt(abar_t) * x0 + sqrt(1-abar_t) * eps.
Tensor forward_marginal(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& schedule);

/// Marginal with an independent timestep per batch item.
Tensor forward_marginal_batch(const Tensor& x0, std::span<const int> t, const Tensor& eps,
                              const NoiseSchedule& schedule);

/// One reverse (denoising) step:
/// (1/sqrt(alpha_t)) * (x_t - beta_t/sqrt(1-abar_t) * eps_pred) + sigma_t * z.
/// Callers pass z = 0 at t = 1.
Tensor reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& z,
                    const NoiseSchedule& schedule, SigmaMode mode);

/// Full ancestral chain from x_T ~ N(0, I) down to x_0. `shape` must be
/// (B, 1, S, S) with S = denoiser image size. Deterministic given rng_seed.
Tensor sample(const DenoiserParams& denoiser, const NoiseSchedule& schedule, SigmaMode mode,
              const std::vector<int64_t>& shape, uint64_t rng_seed);

/// Partial-diffusion reconstruction: noise x0 to step t_ad with the closed
/// form, then run reverse steps t_ad..1. The workhorse of anomaly detection.
Tensor partial_reconstruct(const DenoiserParams& denoiser, const NoiseSchedule& schedule,
                           SigmaMode mode, const Tensor& x0, int t_ad, uint64_t rng_seed);

}  // namespace addm
