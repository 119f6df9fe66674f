#include "addm/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "addm/error.hpp"

namespace addm {

namespace {

struct Counts {
  int64_t tp = 0, fp = 0, fn = 0;
  int64_t p() const { return tp + fp; }   // predicted positives
  int64_t g() const { return tp + fn; }   // ground-truth positives
};

inline bool on(float v) { return v > 0.5f; }

Counts count(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "mask metrics");
  Counts c;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const bool p = on(pred[i]);
    const bool g = on(gt[i]);
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
  }
  return c;
}

double dice_from(const Counts& c) {
  if (c.p() == 0 && c.g() == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(c.p() + c.g());
}

double iou_from(const Counts& c) {
  if (c.p() == 0 && c.g() == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.p() + c.g() - c.tp);
}

double precision_from(const Counts& c) {
  if (c.p() == 0) return c.g() == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.p());
}

double recall_from(const Counts& c) {
  if (c.g() == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.g());
}

}  // namespace

double dice(const Tensor& pred, const Tensor& gt) { return dice_from(count(pred, gt)); }
double iou(const Tensor& pred, const Tensor& gt) { return iou_from(count(pred, gt)); }
double precision(const Tensor& pred, const Tensor& gt) { return precision_from(count(pred, gt)); }
double recall(const Tensor& pred, const Tensor& gt) { return recall_from(count(pred, gt)); }

double pixel_auc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) throw ValidationError("pixel_auc: size mismatch");
  const size_t n = scores.size();
  int64_t pos = 0;
  for (uint8_t l : labels) pos += l != 0;
  const int64_t neg = static_cast<int64_t>(n) - pos;
  if (pos == 0 || neg == 0)
    throw ValidationError("pixel_auc: need at least one positive and one negative pixel");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Rank-sum with average ranks over tie groups; the sums stay exact in
  // double (half-integers well below 2^53), so the result matches the
  // pairwise counting definition bit for bit.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double numerator =
      rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return numerator / (static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsTable evaluate_dataset(std::span<const EvalRecord> records, bool macro) {
  if (records.empty()) throw ValidationError("evaluate_dataset: no records");

  MetricsTable table;
  std::vector<double> pooled_scores;
  std::vector<uint8_t> pooled_labels;
  Counts pooled;
  double sum_dice = 0.0, sum_iou = 0.0, sum_prec = 0.0, sum_rec = 0.0;

  for (const EvalRecord& r : records) {
    require_same_shape(r.scores, r.gt_mask, "evaluate_dataset");
    require_same_shape(r.pred_mask, r.gt_mask, "evaluate_dataset");
    const Counts c = count(r.pred_mask, r.gt_mask);
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    if (macro) {
      sum_dice += dice_from(c);
      sum_iou += iou_from(c);
      sum_prec += precision_from(c);
      sum_rec += recall_from(c);
    }
    for (int64_t i = 0; i < r.scores.numel(); ++i) {
      pooled_scores.push_back(r.scores[i]);
      pooled_labels.push_back(on(r.gt_mask[i]) ? 1 : 0);
    }
  }

  if (macro) {
    const double n = static_cast<double>(records.size());
    table.dice = sum_dice / n;
    table.iou = sum_iou / n;
    table.precision = sum_prec / n;
    table.recall = sum_rec / n;
  } else {
    table.dice = dice_from(pooled);
    table.iou = iou_from(pooled);
    table.precision = precision_from(pooled);
    table.recall = recall_from(pooled);
  }
  table.auc = pixel_auc(pooled_scores, pooled_labels);
  return table;
}

}  // namespace addm
