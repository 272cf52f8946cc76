// Intermediate collaboration: re-bin received sparse features into the ego
// frame, take the channel-wise maximum across agents, and run the analytic
// detector on the fused evidence.
#pragma once

#include <vector>

#include "vcpsim/pillars.hpp"
#include "vcpsim/supply_demand.hpp"

namespace vcpsim {

struct FusedEvidence {
  std::vector<DenseGrid> grids;  // per scale, ego frame
};

// Maps each cell center sender frame -> world -> ego frame and re-bins to
// the nearest ego cell at the same scale. Cells landing outside the ego
// range are dropped; collisions resolve by channel-wise max. Output entries
// are sorted by (row, col).
std::vector<SparseGrid> transform_sparse(const std::vector<SparseGrid>& grids,
                                         const Pose2& sender_pose,
                                         const Pose2& ego_pose,
                                         const GridSpec& spec);

// Channel-wise maximum of the ego grids and all received sparse entries.
// Cells untouched by any sender keep the ego values.
FusedEvidence max_fuse(const std::vector<DenseGrid>& ego,
                       const std::vector<std::vector<SparseGrid>>& received);

struct DetectorParams {
  double theta_det = 0.05;   // per-cell confidence threshold
  int min_cells = 3;         // components below this are discarded
  double score_scale = 0.15; // box confidence = 1 - exp(-scale * sum(conf))
  // Cells within this Chebyshev distance join one component. Radius 1 is
  // plain 8-connectivity; radius 2 additionally bridges the one-cell gaps
  // that nearest-cell re-binning of rotated grids introduces. Scene
  // generation keeps distinct objects at least three cells apart, so
  // bridging never merges two objects.
  int link_radius = 2;
};

// Deterministic analytic detector on the base-scale fused evidence:
// threshold per-cell confidence (density * foreground channels), group the
// surviving cells into link_radius-connected components, and fit each
// component's cell centers with the minimum-area oriented rectangle of
// their convex hull (inflated by one cell for the half-cell quantization on
// each side). Box confidence saturates with total component evidence.
std::vector<BevBox> detect(const FusedEvidence& fused, const GridSpec& spec,
                           const DetectorParams& params);

}  // namespace vcpsim
