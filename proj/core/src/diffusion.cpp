#include "addm/diffusion.hpp"

#include <cmath>

#include "addm/error.hpp"
#include "addm/rng.hpp"

namespace addm {

namespace {

void check_image_per_item_t(const Tensor& x, std::span<const int> t, const NoiseSchedule& s) {
  require_rank4(x, "diffusion kernel input");
  if (static_cast<int64_t>(t.size()) != x.dim(0))
    throw ValidationError("diffusion kernel: one timestep per batch item required");
  for (int ti : t) s.check_t(ti);
}

}  // namespace

ReverseCoeffs reverse_coeffs(const NoiseSchedule& schedule, int t, SigmaMode mode) {
  schedule.check_t(t);
  ReverseCoeffs c;
  c.inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(schedule.alpha(t)));
  c.eps_coeff = static_cast<float>(schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t)));
  c.sigma = static_cast<float>(schedule.sigma(t, mode));
  return c;
}

Tensor forward_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& schedule) {
  schedule.check_t(t);
  require_same_shape(x_prev, eps, "forward_step");
  const float c1 = static_cast<float>(std::sqrt(1.0 - schedule.beta(t)));
  const float c2 = static_cast<float>(std::sqrt(schedule.beta(t)));
  Tensor out(x_prev.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = c1 * x_prev[i] + c2 * eps[i];
  return out;
}

Tensor forward_marginal(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
  schedule.check_t(t);
  require_same_shape(x0, eps, "forward_marginal");
  const double abar = schedule.alpha_bar(t);
  const float c1 = static_cast<float>(std::sqrt(abar));
  const float c2 = static_cast<float>(std::sqrt(1.0 - abar));
  Tensor out(x0.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = c1 * x0[i] + c2 * eps[i];
  return out;
}

Tensor forward_marginal_batch(const Tensor& x0, std::span<const int> t, const Tensor& eps,
                              const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_marginal");
  check_image_per_item_t(x0, t, schedule);
  const int64_t per_item = x0.numel() / x0.dim(0);
  Tensor out(x0.shape());
  for (int64_t b = 0; b < x0.dim(0); ++b) {
    const double abar = schedule.alpha_bar(t[static_cast<size_t>(b)]);
    const float c1 = static_cast<float>(std::sqrt(abar));
    const float c2 = static_cast<float>(std::sqrt(1.0 - abar));
    const float* xs = x0.data() + b * per_item;
    const float* es = eps.data() + b * per_item;
    float* os = out.data() + b * per_item;
    for (int64_t i = 0; i < per_item; ++i) os[i] = c1 * xs[i] + c2 * es[i];
  }
  return out;
}

Tensor reverse_step(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& z,
                    const NoiseSchedule& schedule, SigmaMode mode) {
  require_same_shape(x_t, eps_pred, "reverse_step");
  require_same_shape(x_t, z, "reverse_step");
  const ReverseCoeffs c = reverse_coeffs(schedule, t, mode);
  Tensor out(x_t.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = c.inv_sqrt_alpha * (x_t[i] - c.eps_coeff * eps_pred[i]) + c.sigma * z[i];
  return out;
}

namespace {

/// Shared reverse chain: runs steps t_start..1 on `x`, drawing z from `rng`
/// for every step except the last, where z = 0.
Tensor reverse_chain(const DenoiserParams& denoiser, const NoiseSchedule& schedule, SigmaMode mode,
                     Tensor x, int t_start, GaussianRng& rng) {
  const int64_t batch = x.dim(0);
  Tensor zero = Tensor::zeros(x.shape());
  for (int t = t_start; t >= 1; --t) {
    std::vector<int> ts(static_cast<size_t>(batch), t);
    Tensor eps_pred = denoiser_forward(denoiser, x, ts);
    if (t > 1) {
      Tensor z = rng.normal(x.shape());
      x = reverse_step(x, t, eps_pred, z, schedule, mode);
    } else {
      x = reverse_step(x, t, eps_pred, zero, schedule, mode);
    }
  }
  return x;
}

}  // namespace

Tensor sample(const DenoiserParams& denoiser, const NoiseSchedule& schedule, SigmaMode mode,
              const std::vector<int64_t>& shape, uint64_t rng_seed) {
  if (shape.size() != 4 || shape[1] != 1 || shape[2] != denoiser.config.image_size ||
      shape[3] != denoiser.config.image_size)
    throw ValidationError("sample: shape must be (B, 1, image_size, image_size)");
  GaussianRng rng(rng_seed);
  Tensor x = rng.normal(shape);
  return reverse_chain(denoiser, schedule, mode, std::move(x), schedule.T, rng);
}

Tensor partial_reconstruct(const DenoiserParams& denoiser, const NoiseSchedule& schedule,
                           SigmaMode mode, const Tensor& x0, int t_ad, uint64_t rng_seed) {
  schedule.check_t(t_ad);
  require_rank4(x0, "partial_reconstruct input");
  GaussianRng rng(rng_seed);
  Tensor eps = rng.normal(x0.shape());
  Tensor x = forward_marginal(x0, t_ad, eps, schedule);
  return reverse_chain(denoiser, schedule, mode, std::move(x), t_ad, rng);
}

}  // namespace addm
