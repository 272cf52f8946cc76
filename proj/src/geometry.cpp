#include "vcpsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vcpsim {

namespace {

constexpr double kPi = std::numbers::pi;

// Shoelace area of a convex polygon with CCW vertices.
double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  return Pose2{a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
               normalize_angle(a.yaw + b.yaw)};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return Pose2{-(c * p.x + s * p.y), -(-s * p.x + c * p.y),
               normalize_angle(-p.yaw)};
}

Vec2 transform_point(const Pose2& pose, Vec2 p) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return Vec2{pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y};
}

std::array<Vec2, 4> box_corners(const BevBox& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = 0.5 * box.length, hw = 0.5 * box.width;
  // CCW starting at the front-left corner (+length, +width quadrant).
  const std::array<Vec2, 4> local = {
      Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vec2{box.cx + c * local[i].x - s * local[i].y,
                  box.cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

double box_area(const BevBox& box) { return box.length * box.width; }

BevBox transform_box(const Pose2& pose, const BevBox& box) {
  BevBox out = box;
  const Vec2 c = transform_point(pose, {box.cx, box.cy});
  out.cx = c.x;
  out.cy = c.y;
  out.yaw = normalize_angle(box.yaw + pose.yaw);
  return out;
}

double intersection_area(const BevBox& a, const BevBox& b) {
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  std::vector<Vec2> next;
  next.reserve(8);

  // Clip against each directed edge of b; inside = left of the edge.
  for (int e = 0; e < 4 && !poly.empty(); ++e) {
    const Vec2 p0 = cb[e];
    const Vec2 p1 = cb[(e + 1) % 4];
    next.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 cur = poly[i];
      const Vec2 nxt = poly[(i + 1) % poly.size()];
      const double d_cur = cross(p0, p1, cur);
      const double d_nxt = cross(p0, p1, nxt);
      if (d_cur >= 0.0) next.push_back(cur);
      if ((d_cur > 0.0 && d_nxt < 0.0) || (d_cur < 0.0 && d_nxt > 0.0)) {
        const double t = d_cur / (d_cur - d_nxt);
        next.push_back(cur + t * (nxt - cur));
      }
    }
    poly = next;
  }
  return std::max(0.0, polygon_area(poly));
}

double rotated_iou(const BevBox& a, const BevBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = box_area(a) + box_area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<BevBox> nms(const std::vector<BevBox>& boxes,
                        double iou_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold >= 1.0) {
    throw std::invalid_argument("nms: iou_threshold must be in (0,1)");
  }
  std::vector<BevBox> sorted = boxes;
  std::sort(sorted.begin(), sorted.end(), [](const BevBox& a, const BevBox& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.source_agent != b.source_agent) return a.source_agent < b.source_agent;
    if (a.cx != b.cx) return a.cx < b.cx;
    return a.cy < b.cy;
  });

  std::vector<BevBox> kept;
  kept.reserve(sorted.size());
  for (const BevBox& cand : sorted) {
    bool suppressed = false;
    for (const BevBox& k : kept) {
      if (rotated_iou(cand, k) >= iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace vcpsim
