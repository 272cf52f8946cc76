// Planar rigid transforms, oriented boxes, rotated IoU, and NMS.
//
// Everything here is a pure function on immutable values; this is the
// metric substrate every other module (fusion, evaluation) builds on.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace vcpsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }

// Rigid planar pose: translation (x, y) plus heading yaw in (-pi, pi].
// yaw is re-normalized after every composition.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

// Normalizes an angle into (-pi, pi].
double normalize_angle(double a);

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);

// R(yaw) * p + t
Vec2 transform_point(const Pose2& pose, Vec2 p);

using AgentId = std::int32_t;

// Oriented BEV box. length runs along the heading axis, width across it.
struct BevBox {
  double cx = 0.0;
  double cy = 0.0;
  double length = 0.0;
  double width = 0.0;
  double yaw = 0.0;
  double confidence = 0.0;
  AgentId source_agent = -1;

  bool valid() const {
    return length > 0.0 && width > 0.0 && confidence >= 0.0 &&
           confidence <= 1.0;
  }
};

// Corner vertices in counter-clockwise order.
std::array<Vec2, 4> box_corners(const BevBox& box);

double box_area(const BevBox& box);

// Maps a box given in `pose`'s local frame into the parent frame.
BevBox transform_box(const Pose2& pose, const BevBox& box);

// Intersection area of two oriented boxes via Sutherland-Hodgman clipping
// of a's corner polygon against b's half-planes.
double intersection_area(const BevBox& a, const BevBox& b);

// area(a n b) / area(a u b); 0 for disjoint boxes, 1 for identical ones.
double rotated_iou(const BevBox& a, const BevBox& b);

// Greedy descending-confidence suppression. A box is kept iff its IoU with
// every already-kept box is < iou_threshold. Ties in confidence break by
// (source_agent, cx, cy) so results are reproducible.
std::vector<BevBox> nms(const std::vector<BevBox>& boxes, double iou_threshold);

}  // namespace vcpsim
