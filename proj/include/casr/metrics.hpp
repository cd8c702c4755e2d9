#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "casr/image.hpp"

namespace casr {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Ratios in [0, 1]. A ratio whose denominator is zero takes the sentinel
/// 1.0 when its numerator's class is absent from both masks and 0.0
/// otherwise; `degenerate` records that any sentinel was used.
struct MetricReport {
  double acc = 0, iou = 0, dsc = 0, precision = 0, sensitivity = 0, specificity = 0, fnr = 0, fpr = 0;
  double cl_dice = 0;
  bool degenerate = false;
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

/// Every ratio except cl_dice, which is computed from the masks separately.
MetricReport compute_metrics(const ConfusionCounts& c);

/// Skeleton overlap tallies behind clDice; additive like ConfusionCounts.
struct CenterlineCounts {
  std::int64_t pred_skeleton = 0, pred_skeleton_in_gt = 0;
  std::int64_t gt_skeleton = 0, gt_skeleton_in_pred = 0;

  CenterlineCounts& operator+=(const CenterlineCounts& o) {
    pred_skeleton += o.pred_skeleton;
    pred_skeleton_in_gt += o.pred_skeleton_in_gt;
    gt_skeleton += o.gt_skeleton;
    gt_skeleton_in_pred += o.gt_skeleton_in_pred;
    return *this;
  }
};

CenterlineCounts centerline_counts(const BinaryMask& pred, const BinaryMask& gt);
double cl_dice(const CenterlineCounts& c);

/// Centerline Dice: harmonic mean of |thin(pred) & gt| / |thin(pred)| and
/// |thin(gt) & pred| / |thin(gt)|. Both masks empty gives 1, exactly one
/// empty gives 0.
double cl_dice(const BinaryMask& pred, const BinaryMask& gt);

/// Fieldwise sum; micro-average pooling across images or folds.
ConfusionCounts aggregate(const std::vector<ConfusionCounts>& counts);

/// Per-image evaluation row.
struct EvalRow {
  std::string id;
  ConfusionCounts counts;
  CenterlineCounts centerline;
  MetricReport report;
};

EvalRow evaluate_pair(const std::string& id, const BinaryMask& pred, const BinaryMask& gt);

/// Ratio * 100 rounded to 2 decimals, as printed in result tables.
double to_percent(double ratio);

/// CSV with header id,acc,iou,dsc,p,sn,sp,fnr,fpr,cldice: one row per image,
/// then a "pooled" row (metrics of summed pixel and skeleton counts) and a
/// "macro" row (per-image means). Values are percentages.
void write_metrics_csv(std::ostream& os, const std::vector<EvalRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows);

/// Pooled report: metrics of the summed pixel and skeleton counts.
MetricReport pooled_report(const std::vector<EvalRow>& rows);
/// Macro report: arithmetic mean of each per-image ratio.
MetricReport macro_report(const std::vector<EvalRow>& rows);

}  // namespace casr
