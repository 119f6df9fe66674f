#include "addm/schedule.hpp"

#include <cmath>

#include "addm/error.hpp"

namespace addm {

SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "beta") return SigmaMode::kBeta;
  if (s == "posterior") return SigmaMode::kPosterior;
  throw ValidationError("sigma_mode: expected \"beta\" or \"posterior\", got \"" + s + "\"");
}

std::string to_string(SigmaMode m) {
  return m == SigmaMode::kBeta ? "beta" : "posterior";
}

void NoiseSchedule::check_t(int t) const {
  if (t < 1 || t > T)
    throw ValidationError("timestep t=" + std::to_string(t) + " out of range 1.." + std::to_string(T));
}

double NoiseSchedule::beta(int t) const {
  check_t(t);
  return betas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  check_t(t);
  return alphas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_t(t);
  return alpha_bars[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::sigma(int t, SigmaMode mode) const {
  check_t(t);
  double var = mode == SigmaMode::kBeta ? betas[static_cast<size_t>(t - 1)]
                                        : posterior_vars[static_cast<size_t>(t - 1)];
  return std::sqrt(var);
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ValidationError("schedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ValidationError("schedule: need 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.T = T;
  s.betas.resize(static_cast<size_t>(T));
  s.alphas.resize(static_cast<size_t>(T));
  s.alpha_bars.resize(static_cast<size_t>(T));
  s.posterior_vars.resize(static_cast<size_t>(T));

  double step = T > 1 ? (beta_end - beta_start) / static_cast<double>(T - 1) : 0.0;
  double abar = 1.0;
  for (int i = 0; i < T; ++i) {
    double beta = beta_start + step * static_cast<double>(i);
    double alpha = 1.0 - beta;
    double abar_prev = abar;
    abar *= alpha;
    auto k = static_cast<size_t>(i);
    s.betas[k] = beta;
    s.alphas[k] = alpha;
    s.alpha_bars[k] = abar;
    s.posterior_vars[k] = i == 0 ? 0.0 : (1.0 - abar_prev) / (1.0 - abar) * beta;
  }
  return s;
}

double posterior_variance(const NoiseSchedule& schedule, int t) {
  schedule.check_t(t);
  return schedule.posterior_vars[static_cast<size_t>(t - 1)];
}

}  // namespace addm
