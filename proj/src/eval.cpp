#include "vcpsim/eval.hpp"

#include <algorithm>
#include <cstdio>

namespace vcpsim {

namespace {

bool pred_order(const BevBox& a, const BevBox& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.source_agent != b.source_agent) return a.source_agent < b.source_agent;
  if (a.cx != b.cx) return a.cx < b.cx;
  return a.cy < b.cy;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void MatchPool::add(const std::vector<BevBox>& predictions,
                    const std::vector<BevBox>& truths, double iou_thresh) {
  std::vector<BevBox> sorted = predictions;
  std::sort(sorted.begin(), sorted.end(), pred_order);

  std::vector<bool> taken(truths.size(), false);
  for (const BevBox& pred : sorted) {
    double best_iou = 0.0;
    std::size_t best = truths.size();
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (taken[t]) continue;
      const double iou = rotated_iou(pred, truths[t]);
      if (iou > best_iou) {
        best_iou = iou;
        best = t;
      }
    }
    const bool tp = best < truths.size() && best_iou >= iou_thresh;
    if (tp) taken[best] = true;
    hits_.emplace_back(pred.confidence, tp);
  }
  n_truth_ += truths.size();
}

void MatchPool::merge(const MatchPool& other) {
  hits_.insert(hits_.end(), other.hits_.begin(), other.hits_.end());
  n_truth_ += other.n_truth_;
}

PrCurve MatchPool::curve() const {
  PrCurve out;
  if (hits_.empty() || n_truth_ == 0) return out;

  std::vector<std::pair<double, bool>> sorted = hits_;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // One PR point per distinct confidence, cumulative through the group.
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].second) {
      ++tp;
    } else {
      ++fp;
    }
    const bool group_end =
        i + 1 == sorted.size() || sorted[i + 1].first != sorted[i].first;
    if (group_end) {
      PrPoint p;
      p.threshold = sorted[i].first;
      p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      p.recall = static_cast<double>(tp) / static_cast<double>(n_truth_);
      out.points.push_back(p);
    }
  }

  // All-point interpolation: integrate the running-max precision envelope
  // over recall, walking points in order of increasing recall.
  std::vector<double> envelope(out.points.size());
  double running = 0.0;
  for (std::size_t i = out.points.size(); i-- > 0;) {
    running = std::max(running, out.points[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    ap += (out.points[i].recall - prev_recall) * envelope[i];
    prev_recall = out.points[i].recall;
  }
  out.ap = ap;
  return out;
}

PrCurve match_and_score(const std::vector<BevBox>& predictions,
                        const std::vector<BevBox>& truths, double iou_thresh) {
  MatchPool pool;
  pool.add(predictions, truths, iou_thresh);
  return pool.curve();
}

std::string pr_curve_to_csv(const PrCurve& curve) {
  std::string out = "threshold,precision,recall\n";
  for (const PrPoint& p : curve.points) {
    out += format_double(p.threshold) + "," + format_double(p.precision) +
           "," + format_double(p.recall) + "\n";
  }
  return out;
}

BandwidthReport bandwidth_report(const std::vector<ByteReport>& reports,
                                 double rate_hz, double budget_mbps) {
  BandwidthReport out;
  out.budget_mbps = budget_mbps;
  if (reports.empty()) {
    out.within_budget = true;
    return out;
  }
  double total = 0.0;
  for (const ByteReport& r : reports) {
    total += static_cast<double>(r.link_bytes_to_ego());
  }
  out.mean_mbps =
      bytes_to_mbps(total / static_cast<double>(reports.size()), rate_hz);
  out.within_budget = out.mean_mbps <= budget_mbps;
  return out;
}

std::string sweep_records_to_csv(const std::vector<SweepRecord>& records) {
  std::string out = "eps_c,late_fusion,ap50,ap70,mbps,latency_ms\n";
  for (const SweepRecord& r : records) {
    out += format_double(r.eps_c) + "," + (r.late_fusion ? "1" : "0") + "," +
           format_double(r.ap50) + "," + format_double(r.ap70) + "," +
           format_double(r.mbps) + "," + format_double(r.latency_ms) + "\n";
  }
  return out;
}

}  // namespace vcpsim
