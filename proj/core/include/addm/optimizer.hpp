#pragma once

#include <cstdint>
#include <vector>

#include "addm/nets.hpp"
#include "addm/tensor.hpp"

namespace addm {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected first/second moment accumulators, one pair per parameter
/// tensor, in ParamSet order. Moments are kept in double precision so the
/// update tracks the reference recurrence closely; checkpoints store them
/// rounded to f32.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t step = 0;

  static AdamState like(const ParamSet& params);
};

/// One Adam update. `grads` must be in ParamSet order with matching shapes.
/// Per-element arithmetic runs in double and is rounded to float on store.
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamConfig& config = {});

}  // namespace addm
