// Confidence-aware late fusion: filter collaborator boxes by a confidence
// floor, suppress the survivors, merge with the ego results, deduplicate.
#pragma once

#include <vector>

#include "vcpsim/geometry.hpp"
#include "vcpsim/wire.hpp"

namespace vcpsim {

struct LateFusionParams {
  double eps_l = 0.3;    // collaborator boxes below this are discarded
  double beta = 0.9;     // suppression factor for surviving collaborator boxes
  double nms_iou = 0.15;

  void validate() const;  // 0 <= eps_l <= 1, 0 < beta <= 1 (1 = naive mode)
};

// (1) transform collaborator boxes into the ego frame, (2) drop those with
// confidence < eps_l (strict, on the raw confidence), (3) multiply the
// survivors' confidences by beta, (4) merge with the untouched ego boxes and
// run NMS. Output confidences reflect the suppressed values.
std::vector<BevBox> late_fuse(const std::vector<BevBox>& ego_boxes,
                              const std::vector<DetectionMessage>& collaborator_msgs,
                              const Pose2& ego_pose,
                              const LateFusionParams& params);

// Ablation baseline: transform, concatenate, NMS. No filter, no suppression.
std::vector<BevBox> naive_late_fuse(const std::vector<BevBox>& ego_boxes,
                                    const std::vector<DetectionMessage>& collaborator_msgs,
                                    const Pose2& ego_pose, double nms_iou);

}  // namespace vcpsim
