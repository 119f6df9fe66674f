#include "addm/losses.hpp"

#include <cmath>

#include "addm/error.hpp"

namespace addm {

namespace {
double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::fabs(u))); }
}  // namespace

double ddpm_loss(const Tensor& eps, const Tensor& eps_pred) {
  require_same_shape(eps, eps_pred, "ddpm_loss");
  double acc = 0.0;
  for (int64_t i = 0; i < eps.numel(); ++i) {
    const double d = static_cast<double>(eps[i]) - eps_pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eps.numel());
}

double adversarial_generator_loss(std::span<const double> fake_logits) {
  if (fake_logits.empty()) throw ValidationError("adversarial_generator_loss: empty logit set");
  double acc = 0.0;
  for (double z : fake_logits) acc += softplus(-z);  // == -log sigmoid(z)
  return acc / static_cast<double>(fake_logits.size());
}

double discriminator_loss(std::span<const double> real_logits,
                          std::span<const double> fake_logits) {
  if (real_logits.empty() || fake_logits.empty())
    throw ValidationError("discriminator_loss: empty logit set");
  double acc_r = 0.0, acc_f = 0.0;
  for (double z : real_logits) acc_r += softplus(-z);  // -log sigmoid(z)
  for (double z : fake_logits) acc_f += softplus(z);   // -log(1 - sigmoid(z))
  return acc_r / static_cast<double>(real_logits.size()) +
         acc_f / static_cast<double>(fake_logits.size());
}

double addm_generator_objective(double l_ddpm, double l_adv_gen, double lambda) {
  if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
  return l_ddpm + lambda * l_adv_gen;
}

}  // namespace addm
