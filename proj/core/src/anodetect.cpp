#include "addm/anodetect.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "addm/error.hpp"
#include "addm/metrics.hpp"
#include "addm/rng.hpp"

namespace addm {

Tensor residual_map(const Tensor& x0, const Tensor& xhat0) {
  require_same_shape(x0, xhat0, "residual_map");
  require_rank4(x0, "residual_map");
  const int64_t bs = x0.dim(0), c = x0.dim(1), h = x0.dim(2), w = x0.dim(3);

  Tensor absdiff(x0.shape());
  for (int64_t i = 0; i < x0.numel(); ++i) absdiff[i] = std::fabs(x0[i] - xhat0[i]);

  Tensor out(x0.shape());
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
          double acc = 0.0;
          int n = 0;
          for (int64_t dy = -1; dy <= 1; ++dy)
            for (int64_t dx = -1; dx <= 1; ++dx) {
              const int64_t yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += absdiff.at(b, ch, yy, xx);
              ++n;
            }
          out.at(b, ch, y, x) = static_cast<float>(acc / n);
        }
  return out;
}

Reconstruction reconstruct_residual(const DenoiserParams& denoiser, const NoiseSchedule& schedule,
                                    SigmaMode mode, const Tensor& image, int t_ad,
                                    uint64_t rng_seed, int n_recon) {
  schedule.check_t(t_ad);
  if (n_recon < 1) throw ValidationError("detect: n_recon must be >= 1");
  Reconstruction r{Tensor(image.shape()), Tensor(image.shape())};
  for (int k = 0; k < n_recon; ++k) {
    Tensor recon = partial_reconstruct(denoiser, schedule, mode, image, t_ad,
                                       derive_seed(rng_seed, static_cast<uint64_t>(k)));
    Tensor res = residual_map(image, recon);
    for (int64_t i = 0; i < image.numel(); ++i) {
      r.reconstruction[i] += recon[i] / static_cast<float>(n_recon);
      r.residual[i] += res[i] / static_cast<float>(n_recon);
    }
  }
  return r;
}

AnomalyResult detect(const DenoiserParams& denoiser, const NoiseSchedule& schedule, SigmaMode mode,
                     const Tensor& image, int t_ad, double threshold, uint64_t rng_seed,
                     int n_recon, const Tensor* gt_mask) {
  if (!(threshold >= 0.0)) throw ValidationError("detect: threshold must be nonnegative");

  AnomalyResult result;
  result.threshold_used = threshold;
  Reconstruction rec = reconstruct_residual(denoiser, schedule, mode, image, t_ad, rng_seed, n_recon);
  result.reconstruction = std::move(rec.reconstruction);
  result.residual = std::move(rec.residual);

  result.mask = Tensor(image.shape());
  for (int64_t i = 0; i < image.numel(); ++i)
    result.mask[i] = result.residual[i] > threshold ? 1.0f : 0.0f;

  if (gt_mask) {
    require_same_shape(*gt_mask, result.mask, "detect gt mask");
    PerImageMetrics m;
    m.dice = dice(result.mask, *gt_mask);
    m.iou = iou(result.mask, *gt_mask);
    m.precision = precision(result.mask, *gt_mask);
    m.recall = recall(result.mask, *gt_mask);
    result.metrics = m;
  }
  return result;
}

double choose_threshold(std::span<const float> pooled_residuals, double quantile) {
  if (pooled_residuals.empty()) throw ValidationError("choose_threshold: empty residual pool");
  if (!(quantile > 0.0) || !(quantile < 1.0))
    throw ValidationError("choose_threshold: quantile must lie in (0, 1)");
  std::vector<float> sorted(pooled_residuals.begin(), pooled_residuals.end());
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank: smallest value with at least ceil(q*n) samples <= it.
  const auto n = sorted.size();
  size_t rank = static_cast<size_t>(std::ceil(quantile * static_cast<double>(n)));
  rank = std::max<size_t>(rank, 1);
  return sorted[rank - 1];
}

}  // namespace addm
