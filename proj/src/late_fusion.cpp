#include "vcpsim/late_fusion.hpp"

#include <stdexcept>

namespace vcpsim {

void LateFusionParams::validate() const {
  if (eps_l < 0.0 || eps_l > 1.0) {
    throw std::invalid_argument("LateFusionParams: eps_l must be in [0,1]");
  }
  if (beta <= 0.0 || beta > 1.0) {
    throw std::invalid_argument("LateFusionParams: beta must be in (0,1]");
  }
  if (nms_iou <= 0.0 || nms_iou >= 1.0) {
    throw std::invalid_argument("LateFusionParams: nms_iou must be in (0,1)");
  }
}

std::vector<BevBox> late_fuse(
    const std::vector<BevBox>& ego_boxes,
    const std::vector<DetectionMessage>& collaborator_msgs,
    const Pose2& ego_pose, const LateFusionParams& params) {
  params.validate();
  std::vector<BevBox> merged = ego_boxes;
  for (const DetectionMessage& msg : collaborator_msgs) {
    const Pose2 to_ego = compose(inverse(ego_pose), msg.pose);
    for (const BevBox& box : msg.boxes) {
      if (box.confidence < params.eps_l) continue;
      BevBox b = transform_box(to_ego, box);
      b.confidence *= params.beta;
      b.source_agent = msg.sender;
      merged.push_back(b);
    }
  }
  return nms(merged, params.nms_iou);
}

std::vector<BevBox> naive_late_fuse(
    const std::vector<BevBox>& ego_boxes,
    const std::vector<DetectionMessage>& collaborator_msgs,
    const Pose2& ego_pose, double nms_iou) {
  std::vector<BevBox> merged = ego_boxes;
  for (const DetectionMessage& msg : collaborator_msgs) {
    const Pose2 to_ego = compose(inverse(ego_pose), msg.pose);
    for (const BevBox& box : msg.boxes) {
      BevBox b = transform_box(to_ego, box);
      b.source_agent = msg.sender;
      merged.push_back(b);
    }
  }
  return nms(merged, nms_iou);
}

}  // namespace vcpsim
