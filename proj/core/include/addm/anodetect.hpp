#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "addm/diffusion.hpp"
#include "addm/nets.hpp"
#include "addm/schedule.hpp"
#include "addm/tensor.hpp"

namespace addm {

struct PerImageMetrics {
  double dice = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct AnomalyResult {
  Tensor reconstruction;  // mean over n_recon partial reconstructions
  Tensor residual;        // smoothed |x0 - xhat0|, averaged over n_recon
  Tensor mask;            // residual > threshold
  double threshold_used = 0.0;
  std::optional<PerImageMetrics> metrics;  // filled when a gt mask is given
};

/// Elementwise |x0 - xhat0| followed by one 3x3 box-filter pass; edge pixels
/// average over their shrunken neighborhood.
Tensor residual_map(const Tensor& x0, const Tensor& xhat0);

/// The reconstruction stage of detect(), exposed so callers that pick the
/// threshold from pooled residuals can run it once per image.
struct Reconstruction {
  Tensor reconstruction;  // mean over n_recon
  Tensor residual;        // mean smoothed residual
};
Reconstruction reconstruct_residual(const DenoiserParams& denoiser, const NoiseSchedule& schedule,
                                    SigmaMode mode, const Tensor& image, int t_ad,
                                    uint64_t rng_seed, int n_recon);

/// Full detection pipeline for one image (or batch): partial diffusion to
/// t_ad, reconstruction, residual, threshold. rng_seed k of n_recon uses
/// derive_seed(rng_seed, k).
AnomalyResult detect(const DenoiserParams& denoiser, const NoiseSchedule& schedule, SigmaMode mode,
                     const Tensor& image, int t_ad, double threshold, uint64_t rng_seed,
                     int n_recon = 1, const Tensor* gt_mask = nullptr);

/// Nearest-rank quantile of pooled residual pixels from normal validation
/// images; quantile must lie strictly inside (0, 1).
double choose_threshold(std::span<const float> pooled_residuals, double quantile);

}  // namespace addm
