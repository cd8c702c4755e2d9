#include "casr/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "casr/error.hpp"
#include "casr/postprocess.hpp"

namespace casr {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require(same_size(pred, gt), "confusion: dimension mismatch");
  ConfusionCounts c;
  c.tp = (pred && gt).count();
  c.fp = (pred && !gt).count();
  c.fn = (!pred && gt).count();
  c.tn = pred.size() - c.tp - c.fp - c.fn;
  return c;
}

namespace {

// num / den, or the sentinel when den == 0: 1.0 if `other_side_empty` (the
// class is absent from both masks), else 0.0.
double ratio(std::int64_t num, std::int64_t den, bool other_side_empty, bool& degenerate) {
  if (den > 0) return static_cast<double>(num) / static_cast<double>(den);
  degenerate = true;
  return other_side_empty ? 1.0 : 0.0;
}

}  // namespace

MetricReport compute_metrics(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.fp >= 0 && c.tn >= 0 && c.fn >= 0, "compute_metrics: negative count");
  MetricReport r;
  bool& d = r.degenerate;
  r.acc = ratio(c.tp + c.tn, c.total(), true, d);
  r.iou = ratio(c.tp, c.tp + c.fp + c.fn, true, d);
  r.dsc = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, true, d);
  r.precision = ratio(c.tp, c.tp + c.fp, c.fn == 0, d);
  r.sensitivity = ratio(c.tp, c.tp + c.fn, c.fp == 0, d);
  r.specificity = ratio(c.tn, c.tn + c.fp, c.fn == 0, d);
  r.fnr = 1.0 - r.sensitivity;
  r.fpr = 1.0 - r.specificity;
  if (c.tp + c.fn > 0) r.fnr = static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) r.fpr = static_cast<double>(c.fp) / static_cast<double>(c.tn + c.fp);
  return r;
}

CenterlineCounts centerline_counts(const BinaryMask& pred, const BinaryMask& gt) {
  require(same_size(pred, gt), "cl_dice: dimension mismatch");
  const Skeleton sp = thin(pred), sg = thin(gt);
  CenterlineCounts c;
  c.pred_skeleton = sp.count();
  c.pred_skeleton_in_gt = (sp && gt).count();
  c.gt_skeleton = sg.count();
  c.gt_skeleton_in_pred = (sg && pred).count();
  return c;
}

double cl_dice(const CenterlineCounts& c) {
  if (c.pred_skeleton == 0 && c.gt_skeleton == 0) return 1.0;
  if (c.pred_skeleton == 0 || c.gt_skeleton == 0) return 0.0;
  const double tprec = static_cast<double>(c.pred_skeleton_in_gt) / static_cast<double>(c.pred_skeleton);
  const double tsens = static_cast<double>(c.gt_skeleton_in_pred) / static_cast<double>(c.gt_skeleton);
  if (tprec + tsens == 0.0) return 0.0;
  return 2.0 * tprec * tsens / (tprec + tsens);
}

double cl_dice(const BinaryMask& pred, const BinaryMask& gt) { return cl_dice(centerline_counts(pred, gt)); }

ConfusionCounts aggregate(const std::vector<ConfusionCounts>& counts) {
  require(!counts.empty(), "aggregate: empty list");
  ConfusionCounts sum;
  for (const auto& c : counts) sum += c;
  return sum;
}

EvalRow evaluate_pair(const std::string& id, const BinaryMask& pred, const BinaryMask& gt) {
  EvalRow row{id, confusion(pred, gt), centerline_counts(pred, gt), {}};
  row.report = compute_metrics(row.counts);
  row.report.cl_dice = cl_dice(row.centerline);
  return row;
}

double to_percent(double ratio) { return std::round(ratio * 10000.0) / 100.0; }

MetricReport pooled_report(const std::vector<EvalRow>& rows) {
  require(!rows.empty(), "pooled_report: no rows");
  ConfusionCounts counts;
  CenterlineCounts centerline;
  for (const auto& row : rows) {
    counts += row.counts;
    centerline += row.centerline;
  }
  MetricReport r = compute_metrics(counts);
  r.cl_dice = cl_dice(centerline);
  return r;
}

MetricReport macro_report(const std::vector<EvalRow>& rows) {
  require(!rows.empty(), "macro_report: no rows");
  MetricReport m;
  for (const auto& row : rows) {
    const MetricReport& r = row.report;
    m.acc += r.acc;
    m.iou += r.iou;
    m.dsc += r.dsc;
    m.precision += r.precision;
    m.sensitivity += r.sensitivity;
    m.specificity += r.specificity;
    m.fnr += r.fnr;
    m.fpr += r.fpr;
    m.cl_dice += r.cl_dice;
    m.degenerate = m.degenerate || r.degenerate;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.acc, &m.iou, &m.dsc, &m.precision, &m.sensitivity, &m.specificity, &m.fnr, &m.fpr, &m.cl_dice})
    *v /= n;
  return m;
}

namespace {

void write_row(std::ostream& os, const std::string& id, const MetricReport& r) {
  os << id;
  for (double v : {r.acc, r.iou, r.dsc, r.precision, r.sensitivity, r.specificity, r.fnr, r.fpr, r.cl_dice})
    os << ',' << to_percent(v);
  os << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<EvalRow>& rows) {
  os << "id,acc,iou,dsc,p,sn,sp,fnr,fpr,cldice\n" << std::fixed << std::setprecision(2);
  for (const auto& row : rows) write_row(os, row.id, row.report);
  if (rows.empty()) return;
  write_row(os, "pooled", pooled_report(rows));
  write_row(os, "macro", macro_report(rows));
}

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_metrics_csv(os, rows);
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace casr
