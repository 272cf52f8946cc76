#include "vcpsim/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace vcpsim {

namespace {

struct OrientedRect {
  Vec2 center;
  double extent_u = 0.0;  // along (cos yaw, sin yaw)
  double extent_v = 0.0;
  double yaw = 0.0;
};

// Oriented bounding rectangle whose sides hug the evidence. Lidar evidence
// lives on object boundaries, so among all orientations we pick the one
// where the points sit closest to the sides of their bounding rectangle
// (minimum-area fits are ambiguous for the triangle hull of a two-face
// view). A one-degree sweep over [0, 90) is exact enough at cell scale;
// ties break toward smaller area, then smaller angle, for determinism.
OrientedRect fit_rect(const std::vector<Vec2>& pts) {
  OrientedRect best;
  if (pts.empty()) return best;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_area = std::numeric_limits<double>::infinity();
  for (int deg = 0; deg < 90; ++deg) {
    const double theta = deg * std::numbers::pi / 180.0;
    const double ux = std::cos(theta), uy = std::sin(theta);
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const Vec2& p : pts) {
      const double u = ux * p.x + uy * p.y;
      const double v = -uy * p.x + ux * p.y;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    double cost = 0.0;
    for (const Vec2& p : pts) {
      const double u = ux * p.x + uy * p.y;
      const double v = -uy * p.x + ux * p.y;
      cost += std::min(std::min(u - umin, umax - u),
                       std::min(v - vmin, vmax - v));
    }
    const double area = (umax - umin) * (vmax - vmin);
    const bool better =
        cost < best_cost - 1e-12 ||
        (cost < best_cost + 1e-12 && area < best_area - 1e-12);
    if (better) {
      best_cost = cost;
      best_area = area;
      const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
      best.center = {ux * cu - uy * cv, uy * cu + ux * cv};
      best.extent_u = umax - umin;
      best.extent_v = vmax - vmin;
      best.yaw = theta;
    }
  }
  return best;
}

}  // namespace

std::vector<SparseGrid> transform_sparse(const std::vector<SparseGrid>& grids,
                                         const Pose2& sender_pose,
                                         const Pose2& ego_pose,
                                         const GridSpec& spec) {
  const Pose2 sender_to_ego = compose(inverse(ego_pose), sender_pose);
  std::vector<SparseGrid> out;
  out.reserve(grids.size());
  for (const SparseGrid& sg : grids) {
    const int stride = spec.strides.at(sg.scale);
    const int rows = spec.rows_at(sg.scale), cols = spec.cols_at(sg.scale);
    SparseGrid mapped;
    mapped.scale = sg.scale;
    mapped.rows = rows;
    mapped.cols = cols;

    // key = row * cols + col -> entry index, max on collisions
    std::vector<std::pair<std::int64_t, SparseEntry>> cells;
    cells.reserve(sg.entries.size());
    for (const SparseEntry& e : sg.entries) {
      const Vec2 ego_pt = transform_point(
          sender_to_ego, spec.cell_center(sg.scale, e.row, e.col));
      int br, bc;
      if (!spec.locate(ego_pt, &br, &bc)) continue;
      const int r = br / stride, c = bc / stride;
      if (r >= rows || c >= cols) continue;
      SparseEntry m = e;
      m.row = static_cast<std::uint16_t>(r);
      m.col = static_cast<std::uint16_t>(c);
      cells.emplace_back(static_cast<std::int64_t>(r) * cols + c, m);
    }
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, entry] : cells) {
      if (!mapped.entries.empty() &&
          static_cast<std::int64_t>(mapped.entries.back().row) * cols +
                  mapped.entries.back().col ==
              key) {
        for (int ch = 0; ch < kEvidenceChannels; ++ch) {
          mapped.entries.back().values[ch] =
              std::max(mapped.entries.back().values[ch], entry.values[ch]);
        }
      } else {
        mapped.entries.push_back(entry);
      }
    }
    out.push_back(std::move(mapped));
  }
  return out;
}

FusedEvidence max_fuse(const std::vector<DenseGrid>& ego,
                       const std::vector<std::vector<SparseGrid>>& received) {
  FusedEvidence fused;
  fused.grids = ego;
  for (const auto& sender : received) {
    for (const SparseGrid& sg : sender) {
      if (sg.scale < 0 || sg.scale >= static_cast<int>(fused.grids.size())) {
        throw std::invalid_argument("max_fuse: scale index out of range");
      }
      DenseGrid& grid = fused.grids[sg.scale];
      if ((sg.rows != 0 && sg.rows != grid.rows) ||
          (sg.cols != 0 && sg.cols != grid.cols)) {
        throw std::invalid_argument("max_fuse: grid dimensions differ");
      }
      for (const SparseEntry& e : sg.entries) {
        if (e.row >= grid.rows || e.col >= grid.cols) {
          throw std::invalid_argument("max_fuse: entry out of bounds");
        }
        for (int ch = 0; ch < kEvidenceChannels; ++ch) {
          float& cell = grid.at(e.row, e.col, ch);
          cell = std::max(cell, e.values[ch]);
        }
      }
    }
  }
  return fused;
}

std::vector<BevBox> detect(const FusedEvidence& fused, const GridSpec& spec,
                           const DetectorParams& params) {
  std::vector<BevBox> boxes;
  if (fused.grids.empty()) return boxes;
  const DenseGrid& base = fused.grids.front();
  const int rows = base.rows, cols = base.cols;

  std::vector<float> conf(static_cast<size_t>(rows) * cols, 0.f);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      conf[static_cast<size_t>(r) * cols + c] =
          base.at(r, c, 0) * base.at(r, c, 1);
    }
  }

  std::vector<std::uint8_t> visited(conf.size(), 0);
  const double theta = params.theta_det;
  for (int r0 = 0; r0 < rows; ++r0) {
    for (int c0 = 0; c0 < cols; ++c0) {
      const std::size_t start = static_cast<size_t>(r0) * cols + c0;
      if (visited[start] || conf[start] <= theta) continue;

      // Flood fill over the linking neighborhood.
      const int radius = std::max(1, params.link_radius);
      std::vector<std::pair<int, int>> cells;
      std::deque<std::pair<int, int>> frontier{{r0, c0}};
      visited[start] = 1;
      double evidence_sum = 0.0;
      while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        cells.emplace_back(r, c);
        evidence_sum += conf[static_cast<size_t>(r) * cols + c];
        for (int dr = -radius; dr <= radius; ++dr) {
          for (int dc = -radius; dc <= radius; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
            const std::size_t idx = static_cast<size_t>(nr) * cols + nc;
            if (visited[idx] || conf[idx] <= theta) continue;
            visited[idx] = 1;
            frontier.emplace_back(nr, nc);
          }
        }
      }
      if (static_cast<int>(cells.size()) < params.min_cells) continue;

      std::vector<Vec2> centers;
      centers.reserve(cells.size());
      for (const auto& [r, c] : cells) {
        centers.push_back(spec.cell_center(0, r, c));
      }
      const OrientedRect rect = fit_rect(centers);

      BevBox box;
      box.cx = rect.center.x;
      box.cy = rect.center.y;
      // Cell centers understate the occupied footprint by half a cell on
      // each side.
      double len = rect.extent_u + spec.cell;
      double wid = rect.extent_v + spec.cell;
      double yaw = rect.yaw;
      if (wid > len) {
        std::swap(len, wid);
        yaw += std::numbers::pi / 2.0;
      }
      box.length = len;
      box.width = wid;
      // A box is symmetric under half-turn; keep yaw in (-pi/2, pi/2].
      yaw = normalize_angle(yaw);
      if (yaw > std::numbers::pi / 2.0) yaw -= std::numbers::pi;
      if (yaw <= -std::numbers::pi / 2.0) yaw += std::numbers::pi;
      box.yaw = yaw;
      box.confidence = 1.0 - std::exp(-params.score_scale * evidence_sum);
      boxes.push_back(box);
    }
  }
  return boxes;
}

}  // namespace vcpsim
