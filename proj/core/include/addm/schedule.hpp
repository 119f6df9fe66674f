#pragma once

#include <string>
#include <vector>

namespace addm {

/// Variance used for the reverse-process noise term: sigma_t^2 = beta_t
/// ("beta", the default) or sigma_t^2 = posterior variance ("posterior").
enum class SigmaMode { kBeta, kPosterior };

SigmaMode sigma_mode_from_string(const std::string& s);
std::string to_string(SigmaMode m);

/// Precomputed per-timestep scalars of a diffusion noise schedule. Timesteps
/// are 1-based (t in 1..T); arrays are stored 0-based with betas[t-1] = beta_t.
/// Immutable after construction and safe to share across threads.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;           // beta_t, each in (0,1)
  std::vector<double> alphas;          // 1 - beta_t
  std::vector<double> alpha_bars;      // prod_{s<=t} alpha_s, strictly decreasing
  std::vector<double> posterior_vars;  // (1 - abar_{t-1}) / (1 - abar_t) * beta_t

  double beta(int t) const;
  double alpha(int t) const;
  /// alpha_bar(0) == 1 by convention; valid for t in 0..T.
  double alpha_bar(int t) const;
  /// Reverse-step noise scale sigma_t for the given mode.
  double sigma(int t, SigmaMode mode) const;

  void check_t(int t) const;  // throws ValidationError unless 1 <= t <= T
};

/// Linear beta schedule: betas[i] = beta_start + i*(beta_end-beta_start)/(T-1).
/// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// beta-tilde_t, with alpha_bar_0 := 1 (so the value at t=1 is exactly 0).
double posterior_variance(const NoiseSchedule& schedule, int t);

}  // namespace addm
