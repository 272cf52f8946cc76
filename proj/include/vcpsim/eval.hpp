// Detection evaluation: greedy IoU matching, precision-recall curves,
// all-point-interpolated average precision, and the bandwidth report that
// joins scoring to message byte counts.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vcpsim/geometry.hpp"
#include "vcpsim/wire.hpp"

namespace vcpsim {

struct PrPoint {
  double threshold = 0.0;  // confidence cut
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold, recall non-decreasing
  double ap = 0.0;
};

// Pools per-scene matching results so AP can be computed over a suite.
// Matching is done per call; confidences and hit flags accumulate.
class MatchPool {
 public:
  // Greedy matching in descending-confidence order (ties broken by source
  // agent then position): each prediction takes the highest-IoU unmatched
  // truth with IoU >= iou_thresh, else counts as a false positive.
  void add(const std::vector<BevBox>& predictions,
           const std::vector<BevBox>& truths, double iou_thresh);

  // Folds another pool's matches into this one (suite aggregation).
  void merge(const MatchPool& other);

  PrCurve curve() const;
  double ap() const { return curve().ap; }
  std::size_t truth_count() const { return n_truth_; }

 private:
  std::vector<std::pair<double, bool>> hits_;  // (confidence, is_tp)
  std::size_t n_truth_ = 0;
};

PrCurve match_and_score(const std::vector<BevBox>& predictions,
                        const std::vector<BevBox>& truths, double iou_thresh);

std::string pr_curve_to_csv(const PrCurve& curve);

struct BandwidthReport {
  double mean_mbps = 0.0;   // mean per-collaborator link rate
  double budget_mbps = 0.0;
  bool within_budget = false;  // boundary inclusive
};

// One ByteReport per (frame, collaborator); the billed volume is the
// collaborator-to-ego link (features + detections).
BandwidthReport bandwidth_report(const std::vector<ByteReport>& reports,
                                 double rate_hz, double budget_mbps);

struct SweepRecord {
  double eps_c = 0.0;
  bool late_fusion = false;
  double ap50 = 0.0;
  double ap70 = 0.0;
  double mbps = 0.0;
  double latency_ms = 0.0;
};

// Columns: eps_c,late_fusion,ap50,ap70,mbps,latency_ms
std::string sweep_records_to_csv(const std::vector<SweepRecord>& records);

}  // namespace vcpsim
