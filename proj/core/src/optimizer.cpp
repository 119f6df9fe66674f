#include "addm/optimizer.hpp"

#include <cmath>

#include "addm/error.hpp"

namespace addm {

AdamState AdamState::like(const ParamSet& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor& t : params.tensors) {
    s.m.emplace_back(static_cast<size_t>(t.numel()), 0.0);
    s.v.emplace_back(static_cast<size_t>(t.numel()), 0.0);
  }
  return s;
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw ValidationError("adam_step: gradient/state layout mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params.tensors[k];
    const Tensor& g = grads[k];
    require_same_shape(p, g, "adam_step gradient");
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i];
      const auto ui = static_cast<size_t>(i);
      m[ui] = config.beta1 * m[ui] + (1.0 - config.beta1) * gi;
      v[ui] = config.beta2 * v[ui] + (1.0 - config.beta2) * gi * gi;
      const double mhat = m[ui] / bc1;
      const double vhat = v[ui] / bc2;
      p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
}

}  // namespace addm
