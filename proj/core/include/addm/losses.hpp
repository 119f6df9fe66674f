#pragma once

#include <span>

#include "addm/tensor.hpp"

namespace addm {

/// Per-step loss values. The generator objective is
/// l_total = l_ddpm + lambda * l_adv_gen; l_disc is the discriminator's own
/// objective and is not part of l_total.
struct LossBreakdown {
  double l_ddpm = 0.0;
  double l_adv_gen = 0.0;
  double l_disc = 0.0;
  double l_total = 0.0;
  double lambda = 0.0;
};

/// Mean squared error between true and predicted noise (the simplified
/// noise-prediction loss, no per-timestep weighting).
double ddpm_loss(const Tensor& eps, const Tensor& eps_pred);

/// Non-saturating generator loss: -mean log sigmoid(logit), evaluated through
/// softplus, so it stays finite for any finite logit.
double adversarial_generator_loss(std::span<const double> fake_logits);

/// Discriminator binary cross-entropy on logits:
/// mean softplus(-real) + mean softplus(fake).
double discriminator_loss(std::span<const double> real_logits,
                          std::span<const double> fake_logits);

/// l_ddpm + lambda * l_adv_gen; rejects negative lambda.
double addm_generator_objective(double l_ddpm, double l_adv_gen, double lambda);

}  // namespace addm
