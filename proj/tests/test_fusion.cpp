#include "vcpsim/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "vcpsim/rng.hpp"
#include "vcpsim/scene.hpp"
#include "vcpsim/wire.hpp"

using namespace vcpsim;

namespace {

constexpr double kPi = std::numbers::pi;

GridSpec test_grid() {
  GridSpec g;
  g.x_min = -12.8;
  g.x_max = 12.8;
  g.y_min = -12.8;
  g.y_max = 12.8;
  g.cell = 0.4;
  g.strides = {1, 2, 4};
  return g;
}

std::vector<SparseGrid> random_sparse(Rng& rng, const GridSpec& g, int count) {
  std::vector<SparseGrid> out;
  for (int scale = 0; scale < g.num_scales(); ++scale) {
    SparseGrid sg;
    sg.scale = scale;
    sg.rows = g.rows_at(scale);
    sg.cols = g.cols_at(scale);
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < count; ++i) {
      cells.emplace_back(static_cast<int>(rng.next_below(sg.rows)),
                         static_cast<int>(rng.next_below(sg.cols)));
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    for (const auto& [r, c] : cells) {
      SparseEntry e;
      e.row = static_cast<std::uint16_t>(r);
      e.col = static_cast<std::uint16_t>(c);
      e.values = {static_cast<float>(rng.next_unit()),
                  static_cast<float>(rng.next_unit())};
      sg.entries.push_back(e);
    }
    out.push_back(std::move(sg));
  }
  return out;
}

std::vector<DenseGrid> random_dense(Rng& rng, const GridSpec& g) {
  std::vector<DenseGrid> out;
  for (int scale = 0; scale < g.num_scales(); ++scale) {
    DenseGrid grid(scale, g.rows_at(scale), g.cols_at(scale),
                   kEvidenceChannels);
    for (float& v : grid.v) {
      v = rng.next_unit() < 0.8 ? 0.f : static_cast<float>(rng.next_unit());
    }
    out.push_back(std::move(grid));
  }
  return out;
}

bool grids_equal(const std::vector<DenseGrid>& a,
                 const std::vector<DenseGrid>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].v != b[i].v) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("transform_sparse with identical poses is cell-exact") {
  const GridSpec g = test_grid();
  Rng rng(71);
  const auto grids = random_sparse(rng, g, 40);
  const Pose2 pose{3.0, -1.0, 0.6};
  const auto mapped = transform_sparse(grids, pose, pose, g);
  REQUIRE(mapped.size() == grids.size());
  for (std::size_t l = 0; l < grids.size(); ++l) {
    REQUIRE(mapped[l].entries.size() == grids[l].entries.size());
    for (std::size_t i = 0; i < grids[l].entries.size(); ++i) {
      CHECK(mapped[l].entries[i].row == grids[l].entries[i].row);
      CHECK(mapped[l].entries[i].col == grids[l].entries[i].col);
      CHECK(mapped[l].entries[i].values[0] == grids[l].entries[i].values[0]);
    }
  }
}

TEST_CASE("transform_sparse shifts one column for a one-cell displacement") {
  const GridSpec g = test_grid();
  SparseGrid sg;
  sg.scale = 0;
  sg.rows = g.base_rows();
  sg.cols = g.base_cols();
  for (int i = 10; i < 20; ++i) {
    sg.entries.push_back({static_cast<std::uint16_t>(i),
                          static_cast<std::uint16_t>(i + 4),
                          {0.5f, 0.25f}});
  }
  // Sender displaced +0.4 m in x relative to the ego: a sender cell at
  // column c is at ego column c+1.
  const Pose2 sender{0.4, 0, 0};
  const Pose2 ego{0, 0, 0};
  const auto mapped = transform_sparse({sg}, sender, ego, g);
  REQUIRE(mapped[0].entries.size() == sg.entries.size());
  for (std::size_t i = 0; i < sg.entries.size(); ++i) {
    CHECK(mapped[0].entries[i].row == sg.entries[i].row);
    CHECK(mapped[0].entries[i].col == sg.entries[i].col + 1);
  }
}

TEST_CASE("transform_sparse of a half-turn sender matches per-cell transform") {
  const GridSpec g = test_grid();
  Rng rng(73);
  const auto grids = random_sparse(rng, g, 30);
  const Pose2 sender{1.2, -0.8, kPi};
  const Pose2 ego{0, 0, 0};
  const Pose2 rel = compose(inverse(ego), sender);
  const auto mapped = transform_sparse(grids, sender, ego, g);
  for (std::size_t l = 0; l < grids.size(); ++l) {
    for (const SparseEntry& e : grids[l].entries) {
      const Vec2 p = transform_point(
          rel, g.cell_center(static_cast<int>(l), e.row, e.col));
      int br, bc;
      if (!g.locate(p, &br, &bc)) continue;
      const int stride = g.strides[l];
      const int rr = br / stride, cc = bc / stride;
      bool found = false;
      for (const SparseEntry& m : mapped[l].entries) {
        if (m.row == rr && m.col == cc) {
          found = m.values[0] >= e.values[0];  // max-collision keeps the max
          break;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("transform_sparse drops cells outside the ego range") {
  const GridSpec g = test_grid();
  SparseGrid sg;
  sg.scale = 0;
  sg.rows = g.base_rows();
  sg.cols = g.base_cols();
  sg.entries.push_back({0, 0, {1.f, 1.f}});
  const Pose2 sender{30.0, 0, 0};  // far away: everything lands outside
  const auto mapped = transform_sparse({sg}, sender, Pose2{}, g);
  CHECK(mapped[0].entries.empty());
}

TEST_CASE("max_fuse identities and commutativity") {
  const GridSpec g = test_grid();
  Rng rng(79);
  const auto ego = random_dense(rng, g);

  // No messages: fused equals ego.
  const FusedEvidence none = max_fuse(ego, {});
  CHECK(grids_equal(none.grids, ego));

  // Received value above ego wins; below leaves ego.
  const auto a = random_sparse(rng, g, 60);
  const auto b = random_sparse(rng, g, 60);
  const FusedEvidence ab = max_fuse(ego, {a, b});
  const FusedEvidence ba = max_fuse(ego, {b, a});
  CHECK(grids_equal(ab.grids, ba.grids));

  // Idempotent over message multisets.
  const FusedEvidence abab = max_fuse(ego, {a, b, a, b});
  CHECK(grids_equal(abab.grids, ab.grids));

  // Fused >= ego pointwise.
  for (std::size_t l = 0; l < ego.size(); ++l) {
    for (std::size_t i = 0; i < ego[l].v.size(); ++i) {
      CHECK(ab.grids[l].v[i] >= ego[l].v[i]);
    }
  }
}

TEST_CASE("detect on zero evidence is empty") {
  const GridSpec g = test_grid();
  FusedEvidence fused;
  for (int scale = 0; scale < g.num_scales(); ++scale) {
    fused.grids.emplace_back(scale, g.rows_at(scale), g.cols_at(scale),
                             kEvidenceChannels);
  }
  CHECK(detect(fused, g, DetectorParams{}).empty());
}

TEST_CASE("detect recovers a close fully-visible object within one cell") {
  // Diagonal view gives the sampler two faces of the box; the fitted
  // rectangle center must land within 0.4 m of the true center.
  const GridSpec g = test_grid();
  Scene s;
  s.seed = 21;
  s.agents.push_back({0, {-6.0, -6.0, 0.7}});
  const BevBox truth{0.5, 0.3, 4.6, 2.0, 0.3, 1.0, -1};
  s.objects.push_back({100, truth, {}});

  SamplerConfig sampler;
  sampler.x_min = g.x_min;
  sampler.x_max = g.x_max;
  sampler.y_min = g.y_min;
  sampler.y_max = g.y_max;
  const PointCloud pc = sample_lidar(s, 0, 0.0, sampler);

  // Build evidence in the agent frame grid, then detect.
  FusedEvidence fused;
  fused.grids = build_evidence(pc, g);
  const auto boxes = detect(fused, g, DetectorParams{});
  REQUIRE(boxes.size() == 1);

  // Compare in the agent frame.
  const BevBox truth_local = transform_box(inverse(s.agents[0].pose), truth);
  const double err = std::hypot(boxes[0].cx - truth_local.cx,
                                boxes[0].cy - truth_local.cy);
  CHECK(err < 0.4);
  CHECK(rotated_iou(boxes[0], truth_local) > 0.5);
}

TEST_CASE("detect ignores components below the cell-count floor") {
  const GridSpec g = test_grid();
  FusedEvidence fused;
  for (int scale = 0; scale < g.num_scales(); ++scale) {
    fused.grids.emplace_back(scale, g.rows_at(scale), g.cols_at(scale),
                             kEvidenceChannels);
  }
  // Two hot cells: below the default min_cells of 3.
  fused.grids[0].at(10, 10, 0) = 1.f;
  fused.grids[0].at(10, 10, 1) = 1.f;
  fused.grids[0].at(10, 11, 0) = 1.f;
  fused.grids[0].at(10, 11, 1) = 1.f;
  CHECK(detect(fused, g, DetectorParams{}).empty());

  fused.grids[0].at(10, 12, 0) = 1.f;
  fused.grids[0].at(10, 12, 1) = 1.f;
  const auto boxes = detect(fused, g, DetectorParams{});
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].confidence == doctest::Approx(1.0 - std::exp(-0.15 * 3.0)));
}

TEST_CASE("an object occluded for the ego appears after fusion") {
  const GridSpec g = test_grid();
  Scene s;
  s.seed = 33;
  s.agents.push_back({0, {-8.0, 0.0, 0.0}});   // ego
  s.agents.push_back({1, {6.0, 7.5, -1.2}});   // collaborator with clear view
  s.objects.push_back({1, BevBox{-2.0, 0.0, 2.0, 6.0, 0.0, 1.0, -1}, {}});
  s.objects.push_back({2, BevBox{4.0, 0.3, 4.5, 2.0, 0.2, 1.0, -1}, {}});

  SamplerConfig sampler;
  sampler.x_min = g.x_min;
  sampler.x_max = g.x_max;
  sampler.y_min = g.y_min;
  sampler.y_max = g.y_max;

  const PointCloud ego_pc = sample_lidar(s, 0, 0.0, sampler);
  int hidden_points = 0;
  for (const LidarPoint& p : ego_pc.points) hidden_points += (p.object_id == 2);
  REQUIRE(hidden_points == 0);

  FusedEvidence ego_only;
  ego_only.grids = build_evidence(ego_pc, g);
  const auto before = detect(ego_only, g, DetectorParams{});
  const BevBox truth_local =
      transform_box(inverse(s.agents[0].pose), s.objects[1].shape);
  for (const BevBox& b : before) {
    CHECK(rotated_iou(b, truth_local) < 0.5);
  }

  // Full feature message from the collaborator.
  const PointCloud collab_pc = sample_lidar(s, 1, 0.0, sampler);
  const auto collab_ev = build_evidence(collab_pc, g);
  const BinaryMask full = full_mask(g.base_rows(), g.base_cols(), true);
  const auto sparse = select_sparse(collab_ev, full, g);
  const auto mapped =
      transform_sparse(sparse, s.agents[1].pose, s.agents[0].pose, g);
  const FusedEvidence fused = max_fuse(ego_only.grids, {mapped});
  const auto after = detect(fused, g, DetectorParams{});
  bool found = false;
  for (const BevBox& b : after) {
    found = found || rotated_iou(b, truth_local) >= 0.5;
  }
  CHECK(found);
}

TEST_CASE("self-collaboration through the wire is a no-op on detections") {
  const GridSpec g = test_grid();
  Scene s;
  s.seed = 37;
  s.agents.push_back({0, {-5.0, -4.0, 0.4}});
  s.objects.push_back({1, BevBox{2.0, 1.0, 4.5, 2.0, 0.9, 1.0, -1}, {}});
  s.objects.push_back({2, BevBox{-1.0, 5.0, 4.2, 1.9, -0.4, 1.0, -1}, {}});

  SamplerConfig sampler;
  sampler.x_min = g.x_min;
  sampler.x_max = g.x_max;
  sampler.y_min = g.y_min;
  sampler.y_max = g.y_max;
  const PointCloud pc = sample_lidar(s, 0, 0.0, sampler);
  const auto evidence = build_evidence(pc, g);

  FeatureMessage msg;
  msg.sender = 0;
  msg.c0 = 16;
  msg.pose = s.agents[0].pose;
  msg.scales =
      select_sparse(evidence, full_mask(g.base_rows(), g.base_cols(), true), g);
  const auto wire = encode_feature_message(msg, {64, 128, 256});
  const FeatureMessage back = decode_feature_message(wire, msg.pose, &g);
  const auto mapped =
      transform_sparse(back.scales, msg.pose, s.agents[0].pose, g);

  FusedEvidence plain;
  plain.grids = evidence;
  const FusedEvidence fused = max_fuse(evidence, {mapped});

  const auto base_boxes = detect(plain, g, DetectorParams{});
  const auto fused_boxes = detect(fused, g, DetectorParams{});
  REQUIRE(base_boxes.size() == fused_boxes.size());
  for (std::size_t i = 0; i < base_boxes.size(); ++i) {
    CHECK(fused_boxes[i].cx == base_boxes[i].cx);
    CHECK(fused_boxes[i].cy == base_boxes[i].cy);
    CHECK(fused_boxes[i].length == base_boxes[i].length);
    CHECK(fused_boxes[i].yaw == base_boxes[i].yaw);
    CHECK(fused_boxes[i].confidence ==
          doctest::Approx(base_boxes[i].confidence).epsilon(1e-3));
  }
}

TEST_CASE("adding messages never lowers matched detection confidence") {
  const GridSpec g = test_grid();
  Rng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    // Ego evidence with one solid component.
    FusedEvidence ego;
    for (int scale = 0; scale < g.num_scales(); ++scale) {
      ego.grids.emplace_back(scale, g.rows_at(scale), g.cols_at(scale),
                             kEvidenceChannels);
    }
    const int r0 = 10 + static_cast<int>(rng.next_below(30));
    const int c0 = 10 + static_cast<int>(rng.next_below(30));
    for (int dr = 0; dr < 3; ++dr) {
      for (int dc = 0; dc < 5; ++dc) {
        ego.grids[0].at(r0 + dr, c0 + dc, 0) = 0.5f;
        ego.grids[0].at(r0 + dr, c0 + dc, 1) = 1.0f;
      }
    }
    const auto before = detect(ego, g, DetectorParams{});
    REQUIRE(before.size() == 1);

    const auto extra = random_sparse(rng, g, 25);
    const FusedEvidence fused = max_fuse(ego.grids, {extra});
    const auto after = detect(fused, g, DetectorParams{});
    // The component containing the original cells can only have grown.
    double best = 0.0;
    for (const BevBox& b : after) {
      if (rotated_iou(b, before[0]) > 0.0 || after.size() == 1) {
        best = std::max(best, b.confidence);
      }
    }
    CHECK(best >= before[0].confidence - 1e-12);
  }
}
