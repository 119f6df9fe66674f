#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "addm/tensor.hpp"

namespace addm {

/// Dataset-level segmentation metrics; every value lies in [0, 1] and
/// dice == 2*iou / (1 + iou) up to roundoff.
struct MetricsTable {
  double dice = 0.0;
  double auc = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Binary masks are float tensors; entries > 0.5 count as foreground.
// Empty-mask conventions: dice and iou are 1 when both masks are empty;
// precision is 1 when both are empty and 0 when only the prediction is
// empty; recall is 1 when the ground truth is empty.
double dice(const Tensor& pred, const Tensor& gt);
double iou(const Tensor& pred, const Tensor& gt);
double precision(const Tensor& pred, const Tensor& gt);
double recall(const Tensor& pred, const Tensor& gt);

/// Mann-Whitney pixel AUC over pooled scores: fraction of (positive,
/// negative) pairs ranked correctly, ties counted 1/2. Computed by sorting;
/// requires at least one positive and one negative label.
double pixel_auc(std::span<const double> scores, std::span<const uint8_t> labels);

struct EvalRecord {
  Tensor scores;     // residual map (anomaly scores)
  Tensor pred_mask;  // thresholded binary mask
  Tensor gt_mask;    // ground truth (all-zero for normal images)
};

/// Pixel-pooled (micro) aggregation over all images; with macro = true the
/// overlap metrics average per-image values instead. AUC always pools.
MetricsTable evaluate_dataset(std::span<const EvalRecord> records, bool macro = false);

}  // namespace addm
